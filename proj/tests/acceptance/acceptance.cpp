// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any gating criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dnarx/cpd.hpp"
#include "dnarx/decoupler.hpp"
#include "dnarx/errors.hpp"
#include "dnarx/excitation.hpp"
#include "dnarx/linalg.hpp"
#include "dnarx/metrics.hpp"
#include "dnarx/narx.hpp"
#include "dnarx/poly.hpp"
#include "dnarx/silverbox.hpp"
#include "dnarx/systems.hpp"
#include "synthetic.hpp"

using namespace dnarx;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd A(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) A(i, j) = nd(rng);
  }
  return A;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- 1

Outcome parameter_counts() {
  const auto p6 = narx::count_pnarx_params(6);
  const auto d6 = decouple::count_dpnarx_params(6, 3, 4);
  const auto d30 = decouple::count_dpnarx_params(30, 9, 5);

  testing::SyntheticOptions o;
  o.n = 800;
  const auto d = testing::synthetic_dataset(testing::synthetic_truth(), o);
  const narx::NarxConfig cfg{3, 3, 1, 3};
  const auto fit = narx::fit_full_pnarx(narx::build_regressors(d, cfg), cfg, narx::Frols{});

  const bool ok = p6 == 84 && fit.candidate_count == 84 && d6 == 37 && d30 == 196;
  return {ok, fmt("P-NARX(m=6)=%llu, candidates=%zu, DP-NARX(6,3,4)=%llu, DP-NARX(30,9,5)=%llu",
                  static_cast<unsigned long long>(p6), fit.candidate_count,
                  static_cast<unsigned long long>(d6), static_cast<unsigned long long>(d30))};
}

// ---------------------------------------------------------------- 2

Outcome storage_formula() {
  const auto a = cpd::jacobian_storage_elements(40960, 5, 30, 9);
  const auto b = cpd::jacobian_storage_elements(40960, 10, 10, 8);
  const bool ok = a == 6819840000ull && b == 655360000ull &&
                  std::abs(static_cast<double>(a) - 6.8198e9) / 6.8198e9 < 1e-4 &&
                  std::abs(static_cast<double>(b) - 6.5536e8) / 6.5536e8 < 1e-4;
  return {ok, fmt("(N=40960,r=5,m=30,M=9) -> %llu, (N=40960,r=10,m=10,M=8) -> %llu",
                  static_cast<unsigned long long>(a), static_cast<unsigned long long>(b))};
}

// ---------------------------------------------------------------- 3

Outcome synthetic_recovery() {
  Clock clock;
  const auto truth = testing::synthetic_truth();
  testing::SyntheticOptions noisy;
  noisy.snr_db = 40.0;
  testing::SyntheticOptions clean;
  testing::SyntheticOptions held;
  held.seed = 2;
  const auto d_noisy = testing::synthetic_dataset(truth, noisy);
  const auto d_clean = testing::synthetic_dataset(truth, clean);
  const auto d_held = testing::synthetic_dataset(truth, held);

  decouple::Algorithm1Options opts;
  opts.r = 2;
  opts.M = 3;
  opts.selection = std::monostate{};
  opts.init.seed = opts.init.als.seed = opts.sls.seed = 1;

  const auto res = decouple::run_algorithm1(d_noisy, truth.cfg, opts, &d_held);
  const auto exact = decouple::run_algorithm1(d_clean, truth.cfg, opts);
  const double seconds = clock.seconds();

  const auto& val = *res.report.validation;
  const double pred = val.prediction.value_or(-1e9);
  const double sim = val.simulation.value_or(-1e9);
  const double angle = testing::max_column_angle_deg(truth.V, exact.model.V);
  const bool ok = pred >= 99.5 && sim >= 98.0 && angle <= 2.0 && seconds < 60.0;
  return {ok, fmt("held-out prediction FIT %.3f, simulation FIT %.3f, noiseless max angle %.4f deg, %.1f s",
                  pred, sim, angle, seconds)};
}

// ---------------------------------------------------------------- 4

Outcome structured_vs_random() {
  Clock clock;
  const auto truth = testing::synthetic_truth();
  testing::SyntheticOptions o;
  o.snr_db = 40.0;
  const auto d = testing::synthetic_dataset(truth, o);
  const auto& cfg = truth.cfg;

  // every arm works on the raw regressors so costs share units
  const auto tab = narx::build_regressors(d, cfg);
  const auto coupled = decouple::fit_coupled(d, cfg, std::monostate{}, false).model;
  decouple::InitOptions io;
  io.seed = io.als.seed = 1;
  decouple::SlsOptions sls;
  sls.seed = 1;

  const auto init = decouple::init_from_cpd(coupled, tab, cfg, 2, 3, decouple::InitMode::cpd_structured, io);
  const auto structured = decouple::refine_sls(init.model, tab, sls, decouple::InitMode::cpd_structured);
  const auto randoms = decouple::random_restarts(tab, cfg, 2, 3, 20, 11, sls, 4);
  const double seconds = clock.seconds();

  std::vector<double> iters;
  double best = INFINITY, worst = -INFINITY;
  int failed = 0;
  for (const auto& s : randoms) {
    if (s.failed) {
      ++failed;
      continue;
    }
    iters.push_back(s.iterations);
    best = std::min(best, s.final_cost);
    worst = std::max(worst, s.final_cost);
  }
  const double med = iters.empty() ? 0.0 : median(iters);
  const double cost = structured.report.cost.back();
  const int it = structured.report.iterations;
  const bool ok = !iters.empty() && it <= 0.67 * med && cost <= best + 1e-9 && seconds < 300.0;
  return {ok, fmt("structured %d iterations (cost %.10g) vs random median %.1f (costs %.10g..%.10g, %d failed), %.1f s",
                  it, cost, med, best, worst, failed, seconds)};
}

// ---------------------------------------------------------------- 5

// Relative residual of the best degree-(M-2) fit of W(:, l) against x_l = Z v_l,
// worst over branches.
double polynomial_fit_residual(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& V,
                               const Eigen::MatrixXd& W, int M) {
  double worst = 0.0;
  for (Eigen::Index l = 0; l < V.cols(); ++l) {
    const Eigen::VectorXd x = Z * V.col(l);
    Eigen::MatrixXd A(x.size(), M - 1);
    for (int j = 0; j < M - 1; ++j) A.col(j) = x.array().pow(j);
    const auto ls = linalg::lstsq(A, W.col(l));
    const Eigen::VectorXd res = W.col(l) - A * ls.coef;
    worst = std::max(worst, res.norm() / W.col(l).norm());
  }
  return worst;
}

Outcome smooth_vs_scattered() {
  auto truth = testing::synthetic_truth();
  // degree 4 so each W column is a quadratic curve
  truth.branches = {poly::UnivariatePoly({1.0, 0.25, -0.08, 0.03}), poly::UnivariatePoly({0.9, -0.2, -0.05, -0.02})};
  testing::SyntheticOptions o;
  o.n = 1200;
  const auto d = testing::synthetic_dataset(testing::synthetic_truth(), o);
  const auto tab = narx::build_regressors(d, truth.cfg).subsample(400);
  const int M = 4;

  auto T = decouple::build_hessian_tensor(decouple::expand_decoupled(truth), tab.Z);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  const double sigma = 0.01 * T.norm() / std::sqrt(static_cast<double>(T.data().size()));
  for (Eigen::Index k = 0; k < T.dim(2); ++k) {
    for (Eigen::Index j = 0; j < T.dim(0); ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        const double e = sigma * nd(rng);
        T(i, j, k) += e;
        if (i != j) T(j, i, k) += e;
      }
    }
  }
  T.mark_symmetric();

  cpd::AlsOptions als;
  als.seed = 3;
  const auto a = cpd::cpd_als(T, 2, als);
  cpd::StructuredOptions so;
  so.als = als;
  const auto s = cpd::cpd_structured(T, tab.Z, 2, M, so);

  const double r_als = polynomial_fit_residual(tab.Z, a.factors.V, a.factors.W, M);
  const double r_str = polynomial_fit_residual(tab.Z, s.V, s.W.evaluate(tab.Z, s.V), M);
  const bool ok = r_als >= 5.0 * r_str;
  return {ok, fmt("polynomial-fit residual of W: unstructured %.3e, structured %.3e (CPD errors %.3e / %.3e)",
                  r_als, r_str, a.relative_error, s.relative_error)};
}

// ---------------------------------------------------------------- 6

double fd_relative_error(const Eigen::MatrixXd& J, const Eigen::MatrixXd& fd) {
  return (J - fd).norm() / std::max(1.0, fd.norm());
}

Outcome oracle_suites() {
  std::mt19937_64 rng(21);
  std::vector<std::string> parts;
  bool ok = true;
  auto record = [&](const char* name, double value, double tol) {
    ok = ok && value < tol;
    parts.push_back(fmt("%s %.2e", name, value));
  };

  const auto truth = testing::synthetic_truth();
  testing::SyntheticOptions o;
  o.n = 600;
  const auto d = testing::synthetic_dataset(truth, o);
  const auto tab = narx::build_regressors(d, truth.cfg);
  const auto coupled = decouple::expand_decoupled(truth);

  // polynomial gradient and Hessian by central differences
  {
    const Eigen::VectorXd z = gaussian(4, 1, rng).col(0) * 0.5;
    const double h = 1e-6;
    Eigen::VectorXd g_fd(4);
    Eigen::MatrixXd H_fd(4, 4);
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      g_fd[i] = (coupled.eval(zp) - coupled.eval(zm)) / (2 * h);
      H_fd.col(i) = (coupled.gradient(zp) - coupled.gradient(zm)) / (2 * h);
    }
    const double e = std::max(fd_relative_error(coupled.gradient(z), g_fd),
                              fd_relative_error(coupled.hessian(z), H_fd));
    record("poly-derivatives", e, 1e-5);
  }

  // separable least-squares Jacobian
  {
    Eigen::MatrixXd V = truth.V + 0.1 * gaussian(4, 2, rng);
    const int M = 3;
    const auto J = decouple::separated_jacobian(V, tab.Z, tab.target, M, true);
    Eigen::MatrixXd fd(J.rows(), J.cols());
    const double h = 1e-6;
    for (Eigen::Index c = 0; c < V.size(); ++c) {
      Eigen::MatrixXd Vp = V, Vm = V;
      Vp(c % 4, c / 4) += h;
      Vm(c % 4, c / 4) -= h;
      fd.col(c) = (decouple::separated_residual(Vp, tab.Z, tab.target, M) -
                   decouple::separated_residual(Vm, tab.Z, tab.target, M)) / (2 * h);
    }
    record("sls-jacobian", fd_relative_error(J, fd), 1e-5);
  }

  // structured CPD slice Jacobian
  {
    const Eigen::MatrixXd V = gaussian(4, 2, rng);
    cpd::StructuredW W{gaussian(2, 2, rng)};
    const Eigen::VectorXd z = gaussian(4, 1, rng).col(0);
    const auto J = cpd::structured_jacobian_slice(V, W, z);
    const Eigen::MatrixXd Z = z.transpose();
    auto slice = [&](const Eigen::MatrixXd& Vx, const cpd::StructuredW& Wx) {
      const auto T = cpd::reconstruct_structured(Vx, Wx, Z);
      Eigen::VectorXd s(16);
      for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 4; ++i) s[j * 4 + i] = T(i, j, 0);
      }
      return s;
    };
    Eigen::MatrixXd fd(16, J.cols());
    const double h = 1e-6;
    for (Eigen::Index c = 0; c < J.cols(); ++c) {
      Eigen::MatrixXd Vp = V, Vm = V;
      cpd::StructuredW Wp = W, Wm = W;
      if (c < V.size()) {
        Vp(c % 4, c / 4) += h;
        Vm(c % 4, c / 4) -= h;
      } else {
        const Eigen::Index q = c - V.size();
        Wp.coeffs(q % 2, q / 2) += h;
        Wm.coeffs(q % 2, q / 2) -= h;
      }
      fd.col(c) = (slice(Vp, Wp) - slice(Vm, Wm)) / (2 * h);
    }
    record("cpd-jacobian", fd_relative_error(J, fd), 1e-5);
  }

  // exact-rank CPD
  {
    const Eigen::MatrixXd V = gaussian(5, 3, rng);
    const Eigen::MatrixXd W = gaussian(40, 3, rng);
    const cpd::CpdFactors f{V, W, std::nullopt};
    auto T = f.reconstruct();
    for (Eigen::Index k = 0; k < T.dim(2); ++k) {
      auto S = T.slice(k);
      const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
      S = sym;
    }
    T.mark_symmetric();
    cpd::AlsOptions als;
    als.seed = 2;
    als.restarts = 10;
    record("exact-rank-cpd", cpd::cpd_als(T, 3, als).relative_error, 1e-8);
  }

  // expansion round trip
  {
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
      const Eigen::VectorXd z = gaussian(4, 1, rng).col(0);
      const double a = truth.evaluate(z);
      worst = std::max(worst, std::abs(coupled.eval(z) - a) / std::max(1.0, std::abs(a)));
    }
    record("expand-round-trip", worst, 1e-10);
  }

  // FIT against e_RMS
  {
    const Eigen::VectorXd y = gaussian(500, 1, rng).col(0);
    const Eigen::VectorXd yh = y + 0.1 * gaussian(500, 1, rng).col(0);
    const auto m = bench::compute_metrics(y, yh);
    const double n = static_cast<double>(y.size());
    const double den = (y.array() - y.mean()).matrix().norm();
    const double fit = 100.0 * (1.0 - std::sqrt(n) * m.e_rms / den);
    record("fit-erms-identity", std::abs(fit - *m.fit_percent), 1e-12);
  }

  // integrator convergence orders
  auto order = [](const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, const Eigen::VectorXd& y4) {
    return std::log2((y1 - y2).norm() / (y2 - y4).norm());
  };
  {
    const auto u = bench::gen_multisine(1024, bench::harmonic_band(7, 200), 50.0, false, 5);
    bench::NewmarkOptions no;
    auto run = [&](int sub) {
      no.substeps = sub;
      return bench::simulate_boucwen({}, u, 1.0 / 750.0, no);
    };
    const double p = order(run(20), run(40), run(80));
    ok = ok && p >= 1.9;
    parts.push_back(fmt("newmark-order %.3f", p));
  }
  {
    const double pi = 3.14159265358979323846;
    auto u = [pi](double t) { return 800.0 * std::sin(2 * pi * 35.0 * t) + 500.0 * std::cos(2 * pi * 71.0 * t); };
    auto run = [&](int sub) {
      bench::Rk4Options ro;
      ro.substeps = sub;
      return bench::simulate_duffing({}, u, 1.0 / 610.35, 600, ro);
    };
    const double p = order(run(2), run(4), run(8));
    ok = ok && p >= 1.9;
    parts.push_back(fmt("rk4-order %.3f", p));
  }

  std::string detail;
  for (const auto& s : parts) detail += (detail.empty() ? "" : ", ") + s;
  return {ok, detail};
}

// ---------------------------------------------------------------- 7

Outcome silverbox() {
  const char* path = std::getenv("DNARX_SILVERBOX_CSV");
  if (!path) return {true, "SKIP (set DNARX_SILVERBOX_CSV to the benchmark CSV)"};
  const auto sb = bench::parse_silverbox(path);
  const narx::NarxConfig cfg{3, 3, 0, 3};
  decouple::Algorithm1Options opts;
  opts.r = 4;
  opts.M = 3;
  opts.init.seed = opts.init.als.seed = opts.sls.seed = 1;
  const auto res = decouple::run_algorithm1(sb.identification, cfg, opts, &sb.validation);
  const auto& v = *res.report.validation;
  const double pred = v.prediction.value_or(-1e9), sim = v.simulation.value_or(-1e9);
  return {pred >= 99.5 && sim >= 98.5, fmt("validation prediction FIT %.3f, simulation FIT %.3f, %llu parameters",
                                            pred, sim, static_cast<unsigned long long>(res.report.decoupled_params))};
}

narx::Dataset boucwen_record(std::uint64_t seed, double rms) {
  constexpr std::size_t period = 8192;
  constexpr int oversample = 20;
  constexpr double fs = 750.0;
  const auto one = bench::gen_multisine(period, bench::harmonic_band(55, 1638), rms, false, seed, oversample);
  const auto fine = bench::repeat_periods(one, 2);
  const Eigen::VectorXd yf = bench::simulate_boucwen({}, fine, 1.0 / (fs * oversample));
  narx::Dataset d;
  d.u.resize(period);
  d.y.resize(period);
  const auto start = static_cast<Eigen::Index>(period * oversample);
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(period); ++k) {
    d.u[k] = fine[start + k * oversample];
    d.y[k] = yf[start + k * oversample];
  }
  d.sample_rate_hz = fs;
  return d;
}

Outcome boucwen() {
  Clock clock;
  auto ident = boucwen_record(1, 55.0);
  auto valid = boucwen_record(2, 50.0);
  // millimetres
  ident.y *= 1e3;
  valid.y *= 1e3;
  const narx::NarxConfig cfg{4, 6, 0, 3};
  decouple::Algorithm1Options opts;
  opts.r = 10;
  opts.M = 8;
  opts.selection = std::monostate{};
  opts.init.hessian_points = 1024;
  opts.init.seed = opts.init.als.seed = opts.sls.seed = 1;
  // capped: at r = 10, M = 8 each structured iteration factors a 10^5 x 170 Jacobian
  opts.init.structured.max_iter = 40;
  opts.sls.max_iter = 30;
  const auto res = decouple::run_algorithm1(ident, cfg, opts);

  const auto f = res.model.as_nonlinearity();
  const auto pred = narx::predict_one_step(f, valid, cfg);
  const auto sim = narx::simulate_free_run(f, valid, cfg);
  const auto tab = narx::build_regressors(valid, cfg);
  const auto mp = bench::compute_metrics(tab.target, pred);
  const double pfit = mp.fit_percent.value_or(-1e9);
  if (sim.unstable) {
    const auto coupled_fits = decouple::evaluate_fits(narx::as_nonlinearity(res.coupled), valid, cfg);
    return {false, fmt("prediction FIT %.3f, simulation unstable (coupled model: %s), %.1f s", pfit,
                       coupled_fits.simulation_unstable ? "also unstable" : "stable", clock.seconds())};
  }
  const auto ms = bench::compute_metrics(tab.target, sim.y_hat);
  const bool ok = pfit >= 97.0 && ms.e_rms <= 2.0 * 0.1705;
  return {ok, fmt("prediction FIT %.3f, simulation FIT %.3f, simulation e_RMS %.4f mm (output RMS %.4f mm), %.1f s",
                  pfit, ms.fit_percent.value_or(-1e9), ms.e_rms,
                  std::sqrt(tab.target.squaredNorm() / static_cast<double>(tab.target.size())),
                  clock.seconds())};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    bool gating;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "parameter counts", true, parameter_counts},
      {2, "Jacobian storage formula", true, storage_formula},
      {3, "synthetic recovery", true, synthetic_recovery},
      {4, "structured init against random restarts", true, structured_vs_random},
      {5, "smooth versus scattered W", true, smooth_vs_scattered},
      {6, "oracle suites", true, oracle_suites},
      {7, "Silver-Box (non-gating)", false, silverbox},
      {7, "Bouc-Wen (non-gating)", false, boucwen},
  };

  int gating_failures = 0;
  for (const auto& c : criteria) {
    Outcome r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const bool skipped = r.detail.rfind("SKIP", 0) == 0;
    const char* tag = skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL");
    std::printf("%s criterion %d: %s: %s\n", tag, c.id, c.name, r.detail.c_str());
    std::fflush(stdout);
    if (c.gating && !r.pass) ++gating_failures;
  }
  return gating_failures == 0 ? 0 : 1;
}
