#include <cmath>
#include <cstdio>
#include <random>

#include <Eigen/SVD>

#include "decouple_internal.hpp"
#include "dnarx/decoupler.hpp"
#include "dnarx/errors.hpp"
#include "dnarx/metrics.hpp"

namespace dnarx::decouple {

namespace {

template <class F>
auto staged(const char* stage, F&& f) {
  try {
    return f();
  } catch (Error& e) {
    if (e.stage().empty()) e.set_stage(stage);
    throw;
  }
}

double std_of(const Eigen::VectorXd& x) {
  if (x.size() < 2) return 1.0;
  const double s = std::sqrt((x.array() - x.mean()).square().mean());
  return s > 0.0 && std::isfinite(s) ? s : 1.0;
}

}  // namespace

InitResult init_random(const narx::RegressorTable& tab, const narx::NarxConfig& cfg, int r, int M,
                       std::uint64_t seed) {
  cfg.validate();
  if (r < 1 || M < 1) throw DimensionError("init_random: r and M must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd V(cfg.input_dim(), r);
  for (Eigen::Index i = 0; i < V.size(); ++i) V.data()[i] = nd(rng);
  InitResult out;
  out.model = detail::finish_model(std::move(V), tab, cfg, M, seed ^ 0x5bd1e995u, out.notes);
  return out;
}

InitResult init_from_cpd(const poly::CoupledPolynomial& p, const narx::RegressorTable& tab,
                         const narx::NarxConfig& cfg, int r, int M, InitMode mode,
                         const InitOptions& opts) {
  if (mode == InitMode::random) return init_random(tab, cfg, r, M, opts.seed);
  cfg.validate();
  if (r < 1 || M < 1) throw DimensionError("init_from_cpd: r and M must be >= 1");
  if (p.input_dim() != cfg.input_dim() || tab.Z.cols() != cfg.input_dim()) {
    throw DimensionError("init_from_cpd: polynomial, table and config disagree on m");
  }

  InitResult out;
  const narx::RegressorTable sub = tab.subsample(opts.hessian_points);
  out.hessian_points = static_cast<std::size_t>(sub.rows());
  if (sub.rows() < tab.rows()) {
    out.notes.push_back("Hessian evaluated on " + std::to_string(sub.rows()) + " of " +
                        std::to_string(tab.rows()) + " regressor rows (uniform stride)");
  }
  const cpd::Tensor3 T = build_hessian_tensor(p, sub.Z);

  Eigen::MatrixXd G(cfg.input_dim(), sub.rows());
  for (Eigen::Index k = 0; k < sub.rows(); ++k) G.col(k) = p.gradient(sub.Z.row(k).transpose());

  Eigen::MatrixXd V;
  if (T.norm() <= 1e-10 * G.norm()) {
    // no curvature: take the dominant gradient directions instead
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinU);
    V = Eigen::MatrixXd::Zero(cfg.input_dim(), r);
    const Eigen::Index avail = std::min<Eigen::Index>(r, svd.matrixU().cols());
    V.leftCols(avail) = svd.matrixU().leftCols(avail);
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> nd;
    for (Eigen::Index l = avail; l < r; ++l) {
      for (Eigen::Index i = 0; i < V.rows(); ++i) V(i, l) = nd(rng);
    }
    out.notes.push_back("Hessian tensor is zero (model is affine); V taken from the gradient");
  } else if (mode == InitMode::cpd) {
    const auto als = cpd::cpd_als(T, r, opts.als);
    V = als.factors.V;
    out.cpd_relative_error = als.relative_error;
    if (!als.converged) out.notes.push_back("ALS stopped at max_iter");
  } else {
    cpd::StructuredOptions so = opts.structured;
    so.als = opts.als;
    const auto st = cpd::cpd_structured(T, sub.Z, r, M, so);
    V = st.V;
    out.cpd_relative_error = st.relative_error;
    out.notes.insert(out.notes.end(), st.notes.begin(), st.notes.end());
  }
  out.model = detail::finish_model(std::move(V), tab, cfg, M, opts.seed ^ 0x5bd1e995u, out.notes);
  return out;
}

FitPair evaluate_fits(const narx::Nonlinearity& f, const narx::Dataset& d,
                      const narx::NarxConfig& cfg) {
  const narx::RegressorTable tab = narx::build_regressors(d, cfg);
  FitPair out;
  const Eigen::VectorXd pred = narx::predict_one_step(f, d, cfg);
  out.prediction = bench::compute_metrics(tab.target, pred).fit_percent;
  const auto sim = narx::simulate_free_run(f, d, cfg);
  out.simulation_unstable = sim.unstable;
  if (!sim.unstable) out.simulation = bench::compute_metrics(tab.target, sim.y_hat).fit_percent;
  return out;
}

narx::Dataset Standardization::apply(const narx::Dataset& d) const {
  narx::Dataset out = d;
  out.u /= su;
  out.y /= sy;
  return out;
}

namespace {

poly::CoupledPolynomial rescale(const poly::CoupledPolynomial& p, const Eigen::VectorXd& s,
                                double out_scale, int direction) {
  std::vector<poly::MonomialTerm> terms;
  for (const auto& t : p.terms()) {
    double c = direction > 0 ? t.coefficient * out_scale : t.coefficient / out_scale;
    for (std::size_t k = 0; k < t.exponents.size(); ++k) {
      const double f = std::pow(s[static_cast<Eigen::Index>(k)], t.exponents[k]);
      c = direction > 0 ? c / f : c * f;
    }
    terms.push_back({t.exponents, c});
  }
  return poly::CoupledPolynomial(p.input_dim(), p.max_degree(), std::move(terms));
}

}  // namespace

// p_std(z_std) = p(z_std .* s) / sy
poly::CoupledPolynomial Standardization::to_standard(const poly::CoupledPolynomial& p) const {
  if (p.input_dim() != zscale.size()) throw DimensionError("standardization: polynomial width");
  return rescale(p, zscale, sy, -1);
}

// p(z) = sy * p_std(z ./ s)
poly::CoupledPolynomial Standardization::from_standard(const poly::CoupledPolynomial& p) const {
  if (p.input_dim() != zscale.size()) throw DimensionError("standardization: polynomial width");
  return rescale(p, zscale, sy, +1);
}

DecoupledModel Standardization::from_standard(const DecoupledModel& m) const {
  DecoupledModel out = m;
  out.V = zscale.cwiseInverse().asDiagonal() * m.V;
  out.c0 *= sy;
  for (auto& g : out.branches) {
    for (auto& c : g.mutable_coeffs()) c *= sy;
  }
  out.normalize();
  return out;
}

Standardization make_standardization(const narx::Dataset& d, const narx::NarxConfig& cfg,
                                     bool enabled) {
  Standardization s;
  if (enabled) {
    s.su = std_of(d.u);
    s.sy = std_of(d.y);
  }
  s.zscale.resize(cfg.input_dim());
  for (int i = 0; i < cfg.n_y; ++i) s.zscale[i] = s.sy;
  for (int i = 0; i < cfg.n_u; ++i) s.zscale[cfg.n_y + i] = s.su;
  return s;
}

narx::FitResult fit_coupled(const narx::Dataset& d, const narx::NarxConfig& cfg,
                            const narx::SelectionPolicy& selection, bool standardize) {
  const auto st = make_standardization(d, cfg, standardize);
  const narx::RegressorTable tab = staged("regressors", [&] {
    return narx::build_regressors(st.apply(d), cfg);
  });
  auto fit = staged("coupled_fit", [&] { return narx::fit_full_pnarx(tab, cfg, selection); });
  fit.model = st.from_standard(fit.model);
  fit.residual *= st.sy;
  return fit;
}

DecoupleResult decouple_coupled(const poly::CoupledPolynomial& coupled, const narx::Dataset& d,
                                const narx::NarxConfig& cfg, const Algorithm1Options& opts) {
  staged("input", [&] {
    cfg.validate();
    d.validate();
    if (opts.r < 1 || opts.M < 1) throw ParseError("r and M must be >= 1");
    if (coupled.input_dim() != cfg.input_dim()) {
      throw DimensionError("coupled model width does not match the NARX configuration");
    }
    return 0;
  });
  const auto st = make_standardization(d, cfg, opts.standardize);
  DecoupleResult out;
  if (opts.standardize) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "signals standardized internally (std u = %.6g, std y = %.6g)",
                  st.su, st.sy);
    out.notes.push_back(buf);
  }
  const narx::RegressorTable tab = staged("regressors", [&] {
    return narx::build_regressors(st.apply(d), cfg);
  });
  const poly::CoupledPolynomial ps = st.to_standard(coupled);

  InitResult init = staged("initialization", [&] {
    return init_from_cpd(ps, tab, cfg, opts.r, opts.M, opts.init_mode, opts.init);
  });
  out.hessian_points = init.hessian_points;
  out.cpd_relative_error = init.cpd_relative_error;
  out.notes.insert(out.notes.end(), init.notes.begin(), init.notes.end());

  SlsResult sls = staged("sls_refine", [&] {
    return refine_sls(init.model, tab, opts.sls, opts.init_mode);
  });
  out.sls = sls.report;
  out.notes.insert(out.notes.end(), sls.report.notes.begin(), sls.report.notes.end());
  out.initial = st.from_standard(init.model);
  out.model = st.from_standard(sls.model);
  return out;
}

Algorithm1Result run_algorithm1(const narx::Dataset& d, const narx::NarxConfig& cfg,
                                const Algorithm1Options& opts, const narx::Dataset* validation) {
  staged("input", [&] {
    cfg.validate();
    d.validate();
    if (validation) validation->validate();
    if (opts.r < 1 || opts.M < 1) throw ParseError("r and M must be >= 1");
    return 0;
  });

  Algorithm1Result res;
  auto& rep = res.report;
  const auto fit = fit_coupled(d, cfg, opts.selection, opts.standardize);
  rep.candidate_count = fit.candidate_count;
  rep.coupled_terms = fit.model.size();
  rep.coupled_params = fit.model.size();
  res.coupled = fit.model;

  auto dec = decouple_coupled(res.coupled, d, cfg, opts);
  res.initial = std::move(dec.initial);
  res.model = std::move(dec.model);
  rep.hessian_points = dec.hessian_points;
  rep.cpd_relative_error = dec.cpd_relative_error;
  rep.sls = std::move(dec.sls);
  rep.notes = std::move(dec.notes);
  rep.decoupled_params = res.model.param_count();

  staged("evaluation", [&] {
    rep.coupled = evaluate_fits(narx::as_nonlinearity(res.coupled), d, cfg);
    rep.initial = evaluate_fits(res.initial.as_nonlinearity(), d, cfg);
    rep.final_model = evaluate_fits(res.model.as_nonlinearity(), d, cfg);
    if (validation) rep.validation = evaluate_fits(res.model.as_nonlinearity(), *validation, cfg);
    return 0;
  });
  return res;
}

}  // namespace dnarx::decouple
