#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/QR>

#include "dnarx/decoupler.hpp"
#include "dnarx/errors.hpp"

namespace dnarx::decouple {

BranchCurve branch_curve(const DecoupledModel& model, const Eigen::MatrixXd& Z, Eigen::Index branch,
                         int points) {
  model.validate();
  if (branch < 0 || branch >= model.rank()) throw DimensionError("branch_curve: no such branch");
  if (points < 2) throw DimensionError("branch_curve: need at least two points");
  if (Z.cols() != model.V.rows() || Z.rows() == 0) throw DimensionError("branch_curve: bad Z");
  const Eigen::VectorXd x = Z * model.V.col(branch);
  BranchCurve out;
  out.x_min = x.minCoeff();
  out.x_max = x.maxCoeff();
  const double span = out.x_max > out.x_min ? out.x_max - out.x_min : 1.0;

  const auto& g = model.branches[static_cast<std::size_t>(branch)];
  out.x_normalized = Eigen::VectorXd::LinSpaced(points, -1.0, 1.0);
  Eigen::VectorXd gx(points);
  for (int i = 0; i < points; ++i) {
    gx[i] = g.eval(out.x_min + 0.5 * (out.x_normalized[i] + 1.0) * span);
  }
  Eigen::MatrixXd A(points, 2);
  A.col(0).setOnes();
  A.col(1) = out.x_normalized;
  const Eigen::VectorXd ab = A.colPivHouseholderQr().solve(gx);
  out.g_nonlinear = gx - A * ab;
  const double peak = out.g_nonlinear.cwiseAbs().maxCoeff();
  if (peak > 0.0) out.g_nonlinear /= peak;
  return out;
}

FirResponse fir_response(const DecoupledModel& model, Eigen::Index branch, double sample_rate_hz,
                         int points) {
  model.validate();
  if (branch < 0 || branch >= model.rank()) throw DimensionError("fir_response: no such branch");
  if (points < 2) throw DimensionError("fir_response: need at least two points");
  const auto& cfg = model.cfg;
  const auto v = model.V.col(branch);
  FirResponse out;
  out.omega = Eigen::VectorXd::LinSpaced(points, 0.0, std::numbers::pi);
  out.hz = out.omega * (sample_rate_hz / (2.0 * std::numbers::pi));
  out.mag_y.resize(points);
  out.mag_u.resize(points);
  for (int k = 0; k < points; ++k) {
    const double w = out.omega[k];
    std::complex<double> hy = 0.0;
    std::complex<double> hu = 0.0;
    for (int i = 0; i < cfg.n_y; ++i) hy += v[i] * std::polar(1.0, -w * (i + 1));
    for (int j = 0; j < cfg.n_u; ++j) hu += v[cfg.n_y + j] * std::polar(1.0, -w * (cfg.n_k + j));
    out.mag_y[k] = std::abs(hy);
    out.mag_u[k] = std::abs(hu);
  }
  return out;
}

}  // namespace dnarx::decouple
