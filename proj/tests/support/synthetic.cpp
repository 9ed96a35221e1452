#include "synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "dnarx/excitation.hpp"

namespace dnarx::testing {

decouple::DecoupledModel synthetic_truth() {
  decouple::DecoupledModel m;
  m.cfg = narx::NarxConfig{2, 2, 1, 3};
  m.V.resize(4, 2);
  m.V.col(0) << 0.6, -0.2, 1.0, 0.2;
  m.V.col(1) << 0.6, -0.3, -0.4, 0.8;
  m.V.col(0).normalize();
  m.V.col(1).normalize();
  m.branches = {poly::UnivariatePoly({1.0, 0.25, -0.08}), poly::UnivariatePoly({0.9, -0.2, -0.05})};
  m.c0 = 0.0;
  return m;
}

narx::Dataset synthetic_dataset(const decouple::DecoupledModel& truth, const SyntheticOptions& o) {
  narx::Dataset d;
  d.sample_rate_hz = 1.0;
  d.u = bench::gen_multisine(o.n, bench::harmonic_band(1, static_cast<int>(o.n / 8)), o.input_rms,
                             false, o.seed);
  d.y = Eigen::VectorXd::Zero(d.u.size());
  const auto& cfg = truth.cfg;
  const int lag = cfg.lag();
  Eigen::VectorXd z(cfg.input_dim());
  for (Eigen::Index t = lag; t < d.u.size(); ++t) {
    int c = 0;
    for (int i = 1; i <= cfg.n_y; ++i) z[c++] = d.y[t - i];
    for (int i = 0; i < cfg.n_u; ++i) z[c++] = d.u[t - cfg.n_k - i];
    d.y[t] = truth.evaluate(z);
  }
  if (o.snr_db) {
    const double sy = std::sqrt((d.y.array() - d.y.mean()).square().mean());
    const double sn = sy * std::pow(10.0, -*o.snr_db / 20.0);
    std::mt19937_64 rng(o.seed ^ 0xabcdef12345ull);
    std::normal_distribution<double> nd(0.0, sn);
    for (Eigen::Index t = 0; t < d.y.size(); ++t) d.y[t] += nd(rng);
  }
  return d;
}

double max_column_angle_deg(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& est) {
  std::vector<bool> used(static_cast<std::size_t>(est.cols()), false);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < truth.cols(); ++i) {
    double best = 180.0;
    Eigen::Index arg = -1;
    for (Eigen::Index j = 0; j < est.cols(); ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double c = std::abs(truth.col(i).normalized().dot(est.col(j).normalized()));
      const double ang = std::acos(std::min(1.0, c)) * 180.0 / std::numbers::pi;
      if (ang < best) {
        best = ang;
        arg = j;
      }
    }
    if (arg >= 0) used[static_cast<std::size_t>(arg)] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace dnarx::testing
