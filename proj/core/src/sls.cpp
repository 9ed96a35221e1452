#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "cpd_internal.hpp"
#include "decouple_internal.hpp"
#include "dnarx/decoupler.hpp"
#include "dnarx/errors.hpp"
#include "dnarx/parallel.hpp"

namespace dnarx::decouple {

namespace {

// Thin QR of the column-equilibrated branch design.
struct Projection {
  Eigen::MatrixXd X;
  Eigen::VectorXd scale;  // X = Q R diag(scale)^{-1}
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  Eigen::VectorXd c;      // least-squares coefficients
  Eigen::VectorXd e;      // X c - y

  Projection(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
             int degree) {
    X = branch_design(V, Z, degree);
    const Eigen::Index P = X.cols();
    if (X.rows() <= P) throw NumericError("branch design has fewer rows than coefficients");
    scale.resize(P);
    for (Eigen::Index j = 0; j < P; ++j) {
      const double n = X.col(j).norm();
      if (!(n > 0.0) || !std::isfinite(n)) {
        throw NumericError("branch design has a zero or non-finite column");
      }
      scale[j] = 1.0 / n;
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X * scale.asDiagonal());
    R = qr.matrixQR().topRows(P).triangularView<Eigen::Upper>();
    const double dmax = R.diagonal().cwiseAbs().maxCoeff();
    const double dmin = R.diagonal().cwiseAbs().minCoeff();
    if (dmin <= 1e-13 * dmax) {
      throw NumericError("branch design is rank deficient (collinear branches?)",
                         dmin > 0.0 ? dmax / dmin : std::numeric_limits<double>::infinity());
    }
    Q = qr.householderQ() * Eigen::MatrixXd::Identity(X.rows(), P);
    const Eigen::VectorXd qty = Q.transpose() * y;
    c = scale.asDiagonal() * R.triangularView<Eigen::Upper>().solve(qty);
    e = Q * qty - y;
  }

  double condition() const {
    const double dmax = R.diagonal().cwiseAbs().maxCoeff();
    const double dmin = R.diagonal().cwiseAbs().minCoeff();
    return dmax / dmin;
  }
};

DecoupledModel model_from(const Eigen::MatrixXd& V, const Eigen::VectorXd& c, int degree,
                          const narx::NarxConfig& cfg) {
  DecoupledModel m;
  m.V = V;
  m.cfg = cfg;
  m.c0 = c[0];
  for (Eigen::Index l = 0; l < V.cols(); ++l) {
    m.branches.emplace_back(std::vector<double>(c.data() + 1 + l * degree,
                                                c.data() + 1 + (l + 1) * degree));
  }
  return m;
}

// J_v for coefficients c laid out as in branch_design.
Eigen::MatrixXd jv_from(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Z,
                        const Eigen::VectorXd& c, int degree) {
  const Eigen::Index m = V.rows();
  const Eigen::Index r = V.cols();
  const Eigen::MatrixXd X = Z * V;
  Eigen::MatrixXd J(Z.rows(), m * r);
  for (Eigen::Index l = 0; l < r; ++l) {
    const poly::UnivariatePoly g(
        std::vector<double>(c.data() + 1 + l * degree, c.data() + 1 + (l + 1) * degree));
    Eigen::VectorXd gp(Z.rows());
    for (Eigen::Index t = 0; t < Z.rows(); ++t) gp[t] = g.eval(X(t, l), 1);
    for (Eigen::Index p = 0; p < m; ++p) J.col(l * m + p) = gp.cwiseProduct(Z.col(p));
  }
  return J;
}

}  // namespace

Eigen::VectorXd separated_residual(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Z,
                                   const Eigen::VectorXd& y, int degree) {
  return Projection(V, Z, y, degree).e;
}

Eigen::MatrixXd coefficient_fixed_jacobian(const DecoupledModel& model, const Eigen::MatrixXd& Z) {
  model.validate();
  const int M = model.degree();
  Eigen::VectorXd c(1 + model.rank() * M);
  c[0] = model.c0;
  for (Eigen::Index l = 0; l < model.rank(); ++l) {
    const auto g = model.branches[static_cast<std::size_t>(l)].coeffs();
    for (int j = 0; j < M; ++j) c[1 + l * M + j] = g[static_cast<std::size_t>(j)];
  }
  return jv_from(model.V, Z, c, M);
}

Eigen::MatrixXd separated_jacobian(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Z,
                                   const Eigen::VectorXd& y, int degree, bool exact) {
  const Projection pr(V, Z, y, degree);
  Eigen::MatrixXd J = jv_from(V, Z, pr.c, degree);
  J -= pr.Q * (pr.Q.transpose() * J);
  if (!exact) return J;

  // second Golub-Pereyra term: -(X^+)^T (dX/dtheta)^T e
  const Eigen::Index m = V.rows();
  const Eigen::Index r = V.cols();
  const Eigen::Index P = pr.X.cols();
  const Eigen::MatrixXd Xv = Z * V;
  for (Eigen::Index l = 0; l < r; ++l) {
    for (Eigen::Index p = 0; p < m; ++p) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(P);
      for (int j = 1; j <= degree; ++j) {
        double s = 0.0;
        for (Eigen::Index t = 0; t < Z.rows(); ++t) {
          s += j * std::pow(Xv(t, l), j - 1) * Z(t, p) * pr.e[t];
        }
        w[1 + l * degree + (j - 1)] = s;
      }
      const Eigen::VectorXd sw = pr.scale.cwiseProduct(w);
      const Eigen::VectorXd u = pr.R.transpose().triangularView<Eigen::Lower>().solve(sw);
      J.col(l * m + p) -= pr.Q * u;
    }
  }
  return J;
}

namespace detail {

DecoupledModel finish_model(Eigen::MatrixXd V, const narx::RegressorTable& tab,
                            const narx::NarxConfig& cfg, int M, std::uint64_t jitter_seed,
                            std::vector<std::string>& notes) {
  V = cpd::detail::normalized_columns(std::move(V));
  BranchSolve bs;
  try {
    bs = solve_branch_coefficients(V, tab.Z, tab.target, M);
  } catch (const NumericError& e) {
    std::mt19937_64 rng(jitter_seed);
    std::normal_distribution<double> nd(0.0, 1e-6);
    for (Eigen::Index i = 0; i < V.size(); ++i) V.data()[i] += nd(rng);
    V = cpd::detail::normalized_columns(std::move(V));
    notes.push_back(std::string("branch design rank deficient, V jittered once: ") + e.what());
    bs = solve_branch_coefficients(V, tab.Z, tab.target, M);
  }

  double total = 0.0;
  for (const auto& g : bs.branches) {
    for (double c : g.coeffs()) total += c * c;
  }
  total = std::sqrt(total);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index l = 0; l < V.cols(); ++l) {
    double n = 0.0;
    for (double c : bs.branches[static_cast<std::size_t>(l)].coeffs()) n += c * c;
    if (std::sqrt(n) >= 1e-12 * total) keep.push_back(l);
  }
  if (keep.empty()) throw NumericError("every branch has vanishing coefficients");
  if (static_cast<Eigen::Index>(keep.size()) < V.cols()) {
    notes.push_back("dropped " + std::to_string(V.cols() - static_cast<Eigen::Index>(keep.size())) +
                    " degenerate branch(es); r reduced to " + std::to_string(keep.size()));
    Eigen::MatrixXd Vk(V.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) Vk.col(static_cast<Eigen::Index>(i)) = V.col(keep[i]);
    V = std::move(Vk);
    bs = solve_branch_coefficients(V, tab.Z, tab.target, M);
  }

  DecoupledModel m;
  m.V = std::move(V);
  m.branches = std::move(bs.branches);
  m.c0 = bs.c0;
  m.cfg = cfg;
  return m;
}

}  // namespace detail

SlsResult refine_sls(const DecoupledModel& init, const narx::RegressorTable& tab,
                     const SlsOptions& opts, InitMode initializer) {
  init.validate();
  if (tab.Z.cols() != init.V.rows()) throw DimensionError("refine_sls: table and model disagree");
  const int M = init.degree();
  const Eigen::MatrixXd& Z = tab.Z;
  const Eigen::VectorXd& y = tab.target;

  SlsResult res;
  res.report.initializer = initializer;
  Eigen::MatrixXd V = cpd::detail::normalized_columns(init.V);
  std::optional<Projection> cur;
  try {
    cur.emplace(V, Z, y, M);
  } catch (const NumericError&) {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> nd(0.0, 1e-6);
    for (Eigen::Index i = 0; i < V.size(); ++i) V.data()[i] += nd(rng);
    V = cpd::detail::normalized_columns(std::move(V));
    res.report.notes.push_back("initial branch design rank deficient, V jittered once");
    cur.emplace(V, Z, y, M);
  }
  double cost = cur->e.squaredNorm();
  res.report.cost.push_back(cost);

  const Eigen::Index m = V.rows();
  const Eigen::Index r = V.cols();
  const Eigen::Index P = m * r;
  double lambda = opts.lambda0;
  for (int it = 0; it < opts.max_iter; ++it) {
    if (cost <= opts.abs_tol) {
      res.report.converged = true;
      break;
    }
    Eigen::MatrixXd J = jv_from(V, Z, cur->c, M);
    J -= cur->Q * (cur->Q.transpose() * J);
    Eigen::VectorXd D = J.colwise().squaredNorm().transpose();
    const double dmax = D.maxCoeff();
    D = D.cwiseMax(dmax > 0.0 ? 1e-12 * dmax : 1.0);

    bool accepted = false;
    while (lambda <= 1e16) {
      Eigen::MatrixXd A(J.rows() + P, P);
      A.topRows(J.rows()) = J;
      A.bottomRows(P) = (lambda * D).cwiseSqrt().asDiagonal();
      Eigen::VectorXd b = Eigen::VectorXd::Zero(J.rows() + P);
      b.head(J.rows()) = -cur->e;
      const Eigen::VectorXd delta = A.householderQr().solve(b);
      Eigen::MatrixXd Vc = V + Eigen::Map<const Eigen::MatrixXd>(delta.data(), m, r);
      Vc = cpd::detail::normalized_columns(std::move(Vc));
      try {
        Projection cand(Vc, Z, y, M);
        const double cc = cand.e.squaredNorm();
        if (cc < cost) {
          const double decrease = (cost - cc) / cost;
          V = std::move(Vc);
          cur.emplace(std::move(cand));
          cost = cc;
          res.report.cost.push_back(cost);
          res.report.iterations = it + 1;
          lambda = std::max(lambda / opts.lambda_factor, 1e-15);
          accepted = true;
          if (decrease < opts.rel_tol) res.report.converged = true;
          break;
        }
      } catch (const NumericError&) {
        // collinear trial point, treated as a rejected step
      }
      lambda *= opts.lambda_factor;
    }
    if (!accepted) {
      res.report.converged = true;
      res.report.notes.push_back("no further decrease possible (damping limit reached)");
      break;
    }
    if (res.report.converged) break;
  }
  if (!res.report.converged) res.report.notes.push_back("SLS hit max_iter");
  res.report.condition = cur->condition();
  res.model = model_from(V, cur->c, M, init.cfg);
  return res;
}

std::vector<RestartSummary> random_restarts(const narx::RegressorTable& tab,
                                            const narx::NarxConfig& cfg, int r, int M,
                                            int restarts, std::uint64_t seed,
                                            const SlsOptions& sls, unsigned threads) {
  std::vector<RestartSummary> out(static_cast<std::size_t>(std::max(restarts, 0)));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    auto& s = out[i];
    s.seed = derive_seed(seed, i);
    try {
      const auto init = init_random(tab, cfg, r, M, s.seed);
      SlsOptions o = sls;
      o.seed = s.seed;
      const auto res = refine_sls(init.model, tab, o, InitMode::random);
      s.iterations = res.report.iterations;
      s.final_cost = res.report.cost.back();
      s.converged = res.report.converged;
    } catch (const Error& e) {
      s.failed = true;
      s.failure = e.what();
    }
  });
  return out;
}

}  // namespace dnarx::decouple
