#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "cpd_internal.hpp"
#include "dnarx/cpd.hpp"
#include "dnarx/errors.hpp"
#include "dnarx/parallel.hpp"

namespace dnarx::cpd {

namespace detail {

double normalize_column(Eigen::Ref<Eigen::VectorXd> col) {
  const double n = col.norm();
  if (n == 0.0) return 1.0;
  double factor = 1.0;
  if (std::abs(n - 1.0) > 1e-12) {
    col /= n;
    factor = n;
  }
  Eigen::Index imax = 0;
  col.cwiseAbs().maxCoeff(&imax);
  if (col[imax] < 0.0) {
    col = -col;
    factor = -factor;
  }
  return factor;
}

Eigen::MatrixXd normalized_columns(Eigen::MatrixXd V) {
  for (Eigen::Index l = 0; l < V.cols(); ++l) normalize_column(V.col(l));
  return V;
}

Eigen::MatrixXd mode3_contract(const Tensor3& T, const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& B) {
  const Eigen::Index K = T.dim(2);
  Eigen::MatrixXd out(K, A.cols());
  Eigen::MatrixXd S(T.dim(0), B.cols());
  for (Eigen::Index k = 0; k < K; ++k) {
    S.noalias() = T.slice(k) * B;
    out.row(k) = A.cwiseProduct(S).colwise().sum();
  }
  return out;
}

Eigen::MatrixXd mode1_contract(const Tensor3& T, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& W) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(T.dim(0), B.cols());
  Eigen::MatrixXd S(T.dim(0), B.cols());
  for (Eigen::Index k = 0; k < T.dim(2); ++k) {
    S.noalias() = T.slice(k) * B;
    out.noalias() += S * W.row(k).asDiagonal();
  }
  return out;
}

Eigen::MatrixXd mode2_contract(const Tensor3& T, const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& W) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(T.dim(1), A.cols());
  Eigen::MatrixXd S(T.dim(1), A.cols());
  for (Eigen::Index k = 0; k < T.dim(2); ++k) {
    S.noalias() = T.slice(k).transpose() * A;
    out.noalias() += S * W.row(k).asDiagonal();
  }
  return out;
}

double residual_sq(const Tensor3& T, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                   const Eigen::MatrixXd& W) {
  double s = 0.0;
  Eigen::MatrixXd R(T.dim(0), T.dim(1));
  for (Eigen::Index k = 0; k < T.dim(2); ++k) {
    R = T.slice(k);
    R.noalias() -= A * W.row(k).asDiagonal() * B.transpose();
    s += R.squaredNorm();
  }
  return s;
}

Eigen::MatrixXd solve_right(const Eigen::MatrixXd& rhs, const Eigen::MatrixXd& G) {
  // rhs * G^{-1} for symmetric positive semidefinite G; the orthogonal
  // decomposition yields the minimum-norm solution when G is singular.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G);
  return cod.solve(rhs.transpose()).transpose();
}

}  // namespace detail

using namespace detail;

void CpdFactors::normalize() {
  for (Eigen::Index l = 0; l < V.cols(); ++l) {
    const double fa = normalize_column(V.col(l));
    const double fb = V2 ? normalize_column(V2->col(l)) : fa;
    const double f = fa * fb;
    if (f != 1.0) W.col(l) *= f;
  }
}

Tensor3 CpdFactors::reconstruct() const {
  const auto& B = mode2();
  Tensor3 out(V.rows(), B.rows(), W.rows(), false);
  for (Eigen::Index k = 0; k < W.rows(); ++k) {
    out.slice(k).noalias() = V * W.row(k).asDiagonal() * B.transpose();
  }
  return out;
}

double relative_error(const Tensor3& T, const CpdFactors& f) {
  const double err = std::sqrt(residual_sq(T, f.V, f.mode2(), f.W));
  const double tn = T.norm();
  return tn > 0.0 ? err / tn : err;
}

namespace {

struct RestartOutcome {
  CpdFactors factors;
  std::vector<double> history;
  bool converged = false;
  int iterations = 0;
};

Eigen::MatrixXd random_factor(Eigen::Index m, Eigen::Index r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd V(m, r);
  for (Eigen::Index l = 0; l < r; ++l)
    for (Eigen::Index i = 0; i < m; ++i) V(i, l) = nd(rng);
  return V;
}

// Leading eigenvectors of sum_k T_k T_k^T; extra columns are random.
Eigen::MatrixXd spectral_factor(const Tensor3& T, Eigen::Index r, std::uint64_t seed) {
  const Eigen::Index m = T.dim(0);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index k = 0; k < T.dim(2); ++k) S.noalias() += T.slice(k) * T.slice(k).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  Eigen::MatrixXd V = random_factor(m, r, seed);
  const Eigen::Index take = std::min(r, m);
  for (Eigen::Index l = 0; l < take; ++l) V.col(l) = es.eigenvectors().col(m - 1 - l);
  return V;
}

bool stalled(double prev, double cur, double tol) {
  if (cur <= 1e-15) return true;
  return (prev - cur) <= tol * prev;
}

RestartOutcome run_shared(const Tensor3& T, Eigen::MatrixXd V0, const AlsOptions& opts) {
  const double tn = T.norm();
  RestartOutcome out;
  Eigen::MatrixXd V = normalized_columns(std::move(V0));
  auto solve_w = [&](const Eigen::MatrixXd& Vc) {
    const Eigen::MatrixXd VtV = Vc.transpose() * Vc;
    return solve_right(mode3_contract(T, Vc, Vc), VtV.cwiseProduct(VtV));
  };
  Eigen::MatrixXd W = solve_w(V);
  double f = residual_sq(T, V, V, W);
  out.history.push_back(std::sqrt(f) / tn);

  static constexpr double kSteps[] = {1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125};
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Eigen::MatrixXd VtV = V.transpose() * V;
    const Eigen::MatrixXd G = (W.transpose() * W).cwiseProduct(VtV);
    Eigen::MatrixXd D = solve_right(mode1_contract(T, V, W), G);
    for (Eigen::Index l = 0; l < D.cols(); ++l) {
      const double n = D.col(l).norm();
      if (n == 0.0) {
        D.col(l) = V.col(l);
        continue;
      }
      D.col(l) /= n;
      if (D.col(l).dot(V.col(l)) < 0.0) D.col(l) = -D.col(l);
    }
    bool accepted = false;
    for (double s : kSteps) {
      Eigen::MatrixXd Vc = normalized_columns(V + s * (D - V));
      Eigen::MatrixXd Wc = solve_w(Vc);
      const double fc = residual_sq(T, Vc, Vc, Wc);
      if (fc < f) {
        V = std::move(Vc);
        W = std::move(Wc);
        f = fc;
        accepted = true;
        break;
      }
    }
    const double prev = out.history.back();
    const double cur = std::sqrt(f) / tn;
    out.history.push_back(cur);
    out.iterations = it;
    if (!accepted || stalled(prev, cur, opts.tol)) {
      out.converged = true;
      break;
    }
  }
  out.factors = {V, W, std::nullopt};
  return out;
}

RestartOutcome run_unshared(const Tensor3& T, Eigen::MatrixXd A0, const AlsOptions& opts) {
  const double tn = T.norm();
  RestartOutcome out;
  Eigen::MatrixXd A = normalized_columns(std::move(A0));
  Eigen::MatrixXd B = A;
  Eigen::MatrixXd W = solve_right(mode3_contract(T, A, B),
                                  (A.transpose() * A).cwiseProduct(B.transpose() * B));
  double f = residual_sq(T, A, B, W);
  out.history.push_back(std::sqrt(f) / tn);

  for (int it = 1; it <= opts.max_iter; ++it) {
    {
      Eigen::MatrixXd An = solve_right(mode1_contract(T, B, W),
                                       (W.transpose() * W).cwiseProduct(B.transpose() * B));
      const double fn = residual_sq(T, An, B, W);
      if (fn <= f) {
        A = std::move(An);
        f = fn;
      }
    }
    {
      Eigen::MatrixXd Bn = solve_right(mode2_contract(T, A, W),
                                       (W.transpose() * W).cwiseProduct(A.transpose() * A));
      const double fn = residual_sq(T, A, Bn, W);
      if (fn <= f) {
        B = std::move(Bn);
        f = fn;
      }
    }
    {
      Eigen::MatrixXd Wn = solve_right(mode3_contract(T, A, B),
                                       (A.transpose() * A).cwiseProduct(B.transpose() * B));
      const double fn = residual_sq(T, A, B, Wn);
      if (fn <= f) {
        W = std::move(Wn);
        f = fn;
      }
    }
    const double prev = out.history.back();
    const double cur = std::sqrt(f) / tn;
    out.history.push_back(cur);
    out.iterations = it;
    if (stalled(prev, cur, opts.tol)) {
      out.converged = true;
      break;
    }
  }
  out.factors = {A, W, B};
  return out;
}

}  // namespace

AlsResult cpd_als(const Tensor3& T, Eigen::Index rank, const AlsOptions& opts) {
  if (rank < 1) throw DimensionError("cpd_als: rank must be >= 1");
  if (!T.all_finite()) throw NumericError("cpd_als: tensor contains NaN or Inf");
  if (opts.shared_modes && T.dim(0) != T.dim(1)) {
    throw DimensionError("cpd_als: shared modes need I == J");
  }
  if (opts.initial_V && (opts.initial_V->rows() != T.dim(0) || opts.initial_V->cols() != rank)) {
    throw DimensionError("cpd_als: initial_V has the wrong shape");
  }
  const Eigen::Index m = T.dim(0);
  const int restarts = std::max(1, opts.restarts);

  auto initial = [&](int restart) -> Eigen::MatrixXd {
    const auto seed = derive_seed(opts.seed, static_cast<std::uint64_t>(restart));
    if (restart == 0) return opts.initial_V ? *opts.initial_V : spectral_factor(T, rank, seed);
    return random_factor(m, rank, seed);
  };

  AlsResult res;
  if (T.norm() == 0.0) {
    res.factors.V = normalized_columns(initial(0));
    res.factors.W = Eigen::MatrixXd::Zero(T.dim(2), rank);
    if (!opts.shared_modes) res.factors.V2 = res.factors.V;
    res.history = {0.0};
    res.converged = true;
    res.restart_errors = {0.0};
    return res;
  }

  std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(restarts));
  parallel_for(outcomes.size(), opts.threads, [&](std::size_t i) {
    const auto V0 = initial(static_cast<int>(i));
    outcomes[i] = opts.shared_modes ? run_shared(T, V0, opts) : run_unshared(T, V0, opts);
  });

  std::size_t best = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    res.restart_errors.push_back(outcomes[i].history.back());
    if (outcomes[i].history.back() < outcomes[best].history.back()) best = i;
  }
  auto& win = outcomes[best];
  win.factors.normalize();
  res.factors = std::move(win.factors);
  res.history = std::move(win.history);
  res.converged = win.converged;
  res.iterations = win.iterations;
  res.best_restart = static_cast<int>(best);
  res.relative_error = relative_error(T, res.factors);
  return res;
}

}  // namespace dnarx::cpd
