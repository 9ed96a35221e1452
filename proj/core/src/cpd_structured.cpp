#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "cpd_internal.hpp"
#include "dnarx/cpd.hpp"
#include "dnarx/errors.hpp"
#include "dnarx/linalg.hpp"

namespace dnarx::cpd {

Eigen::MatrixXd StructuredW::evaluate(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& V) const {
  if (Z.cols() != V.rows() || coeffs.cols() != V.cols()) {
    throw DimensionError("StructuredW::evaluate: shapes of Z, V and coeffs disagree");
  }
  const Eigen::MatrixXd X = Z * V;
  Eigen::MatrixXd W(X.rows(), X.cols());
  const Eigen::Index nc = coeffs.rows();
  for (Eigen::Index l = 0; l < X.cols(); ++l) {
    for (Eigen::Index k = 0; k < X.rows(); ++k) {
      const double x = X(k, l);
      double acc = 0.0;
      double xp = 1.0;
      for (Eigen::Index a = 0; a < nc; ++a) {
        const double jj = static_cast<double>((a + 2) * (a + 1));
        acc += jj * coeffs(a, l) * xp;
        xp *= x;
      }
      W(k, l) = acc;
    }
  }
  return W;
}

Tensor3 reconstruct_structured(const Eigen::MatrixXd& V, const StructuredW& W,
                               const Eigen::MatrixXd& Z) {
  const Eigen::Index m = V.rows();
  const Eigen::MatrixXd Wm = W.evaluate(Z, V);
  Tensor3 out(m, m, Z.rows(), true);
  for (Eigen::Index k = 0; k < Z.rows(); ++k) {
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        double s = 0.0;
        for (Eigen::Index l = 0; l < V.cols(); ++l) s += V(i, l) * V(j, l) * Wm(k, l);
        out(i, j, k) = s;
        out(j, i, k) = s;
      }
    }
  }
  return out;
}

namespace {

// W(k,l) and dW/dx at one point for every branch.
void branch_second_derivs(const Eigen::MatrixXd& coeffs, const Eigen::VectorXd& x,
                          Eigen::VectorXd& w, Eigen::VectorXd& dw) {
  const Eigen::Index nc = coeffs.rows();
  w.resize(x.size());
  dw.resize(x.size());
  for (Eigen::Index l = 0; l < x.size(); ++l) {
    double acc = 0.0;
    double dacc = 0.0;
    double xp = 1.0;   // x^a
    double xpm = 0.0;  // x^(a-1)
    for (Eigen::Index a = 0; a < nc; ++a) {
      const double jj = static_cast<double>((a + 2) * (a + 1));
      acc += jj * coeffs(a, l) * xp;
      if (a >= 1) dacc += jj * static_cast<double>(a) * coeffs(a, l) * xpm;
      xpm = xp;
      xp *= x[l];
    }
    w[l] = acc;
    dw[l] = dacc;
  }
}

}  // namespace

Eigen::MatrixXd structured_jacobian_slice(const Eigen::MatrixXd& V, const StructuredW& W,
                                          const Eigen::Ref<const Eigen::VectorXd>& z) {
  const Eigen::Index m = V.rows();
  const Eigen::Index r = V.cols();
  const Eigen::Index nc = W.coeffs.rows();
  if (z.size() != m || W.coeffs.cols() != r) {
    throw DimensionError("structured_jacobian_slice: shapes disagree");
  }
  const Eigen::VectorXd x = V.transpose() * z;
  Eigen::VectorXd w, dw;
  branch_second_derivs(W.coeffs, x, w, dw);

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m * m, m * r + nc * r);
  for (Eigen::Index l = 0; l < r; ++l) {
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index row = i + m * j;
        const double vv = V(i, l) * V(j, l);
        // product rule through both copies of V
        J(row, l * m + i) += V(j, l) * w[l];
        J(row, l * m + j) += V(i, l) * w[l];
        // chain rule through x_l = v_l^T z inside W
        for (Eigen::Index p = 0; p < m; ++p) J(row, l * m + p) += vv * dw[l] * z[p];
        double xp = 1.0;
        for (Eigen::Index a = 0; a < nc; ++a) {
          J(row, m * r + l * nc + a) = vv * static_cast<double>((a + 2) * (a + 1)) * xp;
          xp *= x[l];
        }
      }
    }
  }
  return J;
}

namespace {

struct UniqueEntries {
  std::vector<Eigen::Index> i, j;
  std::vector<double> weight;

  explicit UniqueEntries(Eigen::Index m) {
    for (Eigen::Index jj = 0; jj < m; ++jj) {
      for (Eigen::Index ii = 0; ii <= jj; ++ii) {
        i.push_back(ii);
        j.push_back(jj);
        weight.push_back(ii == jj ? 1.0 : std::sqrt(2.0));
      }
    }
  }
  Eigen::Index size() const { return static_cast<Eigen::Index>(i.size()); }
};

class StructuredProblem {
 public:
  StructuredProblem(const Tensor3& T, const Eigen::MatrixXd& Z, Eigen::Index r, int degree)
      : T_(T), Z_(Z), m_(T.dim(0)), r_(r), nc_(degree - 1), uniq_(T.dim(0)) {}

  struct Coeffs {
    StructuredW W;
    double cost = 0.0;  // squared Frobenius residual
  };

  // Closed-form coefficients for fixed V (V columns already normalized).
  Coeffs solve_coeffs(const Eigen::MatrixXd& V) const {
    const Eigen::MatrixXd X = Z_ * V;
    // Equilibrate the Vandermonde-like columns by the range of each x_l.
    Eigen::VectorXd range(r_);
    for (Eigen::Index l = 0; l < r_; ++l) {
      range[l] = std::max(X.col(l).cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    }
    const Eigen::Index P = nc_ * r_;
    const Eigen::Index U = uniq_.size();
    linalg::StreamingQR qr(P);
    Eigen::MatrixXd block(U, P);
    Eigen::VectorXd rhs(U);
    for (Eigen::Index k = 0; k < Z_.rows(); ++k) {
      for (Eigen::Index l = 0; l < r_; ++l) {
        const double xs = X(k, l) / range[l];
        for (Eigen::Index u = 0; u < U; ++u) {
          const double base = uniq_.weight[static_cast<std::size_t>(u)] *
                              V(uniq_.i[static_cast<std::size_t>(u)], l) *
                              V(uniq_.j[static_cast<std::size_t>(u)], l);
          double xp = 1.0;
          for (Eigen::Index a = 0; a < nc_; ++a) {
            block(u, l * nc_ + a) = base * static_cast<double>((a + 2) * (a + 1)) * xp;
            xp *= xs;
          }
        }
      }
      for (Eigen::Index u = 0; u < U; ++u) {
        rhs[u] = uniq_.weight[static_cast<std::size_t>(u)] *
                 T_(uniq_.i[static_cast<std::size_t>(u)], uniq_.j[static_cast<std::size_t>(u)], k);
      }
      qr.add_rows(block, rhs);
    }
    const Eigen::VectorXd c = qr.solve();
    Coeffs out;
    out.W.coeffs.resize(nc_, r_);
    for (Eigen::Index l = 0; l < r_; ++l) {
      double scale = 1.0;
      for (Eigen::Index a = 0; a < nc_; ++a) {
        out.W.coeffs(a, l) = c[l * nc_ + a] / scale;
        scale *= range[l];
      }
    }
    out.cost = qr.residual_squared();
    return out;
  }

  // Triangular factor of the weighted [J_C | J_V | e] at (V, W); rows and
  // columns of the V block give the Gauss-Newton system with C projected out.
  void projected_system(const Eigen::MatrixXd& V, const StructuredW& W, Eigen::MatrixXd& R_vv,
                        Eigen::VectorXd& r_v) const {
    const Eigen::Index Pv = m_ * r_;
    const Eigen::Index Pc = nc_ * r_;
    const Eigen::Index U = uniq_.size();
    const Eigen::MatrixXd Wm = W.evaluate(Z_, V);
    linalg::StreamingQR qr(Pc + Pv);
    Eigen::MatrixXd block(U, Pc + Pv);
    Eigen::VectorXd rhs(U);
    for (Eigen::Index k = 0; k < Z_.rows(); ++k) {
      const Eigen::MatrixXd J = structured_jacobian_slice(V, W, Z_.row(k).transpose());
      for (Eigen::Index u = 0; u < U; ++u) {
        const auto i = uniq_.i[static_cast<std::size_t>(u)];
        const auto j = uniq_.j[static_cast<std::size_t>(u)];
        const double wgt = uniq_.weight[static_cast<std::size_t>(u)];
        const Eigen::Index row = i + m_ * j;
        block.row(u).head(Pc) = wgt * J.row(row).tail(Pc);
        block.row(u).tail(Pv) = wgt * J.row(row).head(Pv);
        double that = 0.0;
        for (Eigen::Index l = 0; l < r_; ++l) that += V(i, l) * V(j, l) * Wm(k, l);
        rhs[u] = wgt * (that - T_(i, j, k));
      }
      qr.add_rows(block, rhs);
    }
    const Eigen::MatrixXd& R = qr.triangular();
    R_vv = R.block(Pc, Pc, Pv, Pv).triangularView<Eigen::Upper>();
    r_v = R.col(Pc + Pv).segment(Pc, Pv);
  }

  Eigen::Index m() const { return m_; }
  Eigen::Index r() const { return r_; }

 private:
  const Tensor3& T_;
  const Eigen::MatrixXd& Z_;
  Eigen::Index m_, r_, nc_;
  UniqueEntries uniq_;
};

}  // namespace

StructuredResult cpd_structured(const Tensor3& T, const Eigen::MatrixXd& Z, Eigen::Index rank,
                                int degree, const StructuredOptions& opts) {
  if (!T.symmetric()) throw DimensionError("cpd_structured: tensor must be flagged symmetric");
  if (Z.rows() != T.dim(2) || Z.cols() != T.dim(0)) {
    throw DimensionError("cpd_structured: Z must be N x m matching the tensor");
  }
  if (rank < 1) throw DimensionError("cpd_structured: rank must be >= 1");
  if (degree < 2) throw DimensionError("cpd_structured: branch degree must be >= 2");
  if (!T.all_finite()) throw NumericError("cpd_structured: tensor contains NaN or Inf");
  check_jacobian_budget(static_cast<std::uint64_t>(Z.rows()), static_cast<std::uint64_t>(rank),
                        static_cast<std::uint64_t>(T.dim(0)), static_cast<std::uint64_t>(degree),
                        opts.mem_budget_bytes);

  StructuredResult res;
  Eigen::MatrixXd V;
  if (opts.initial_V) {
    if (opts.initial_V->rows() != T.dim(0) || opts.initial_V->cols() != rank) {
      throw DimensionError("cpd_structured: initial_V has the wrong shape");
    }
    V = *opts.initial_V;
  } else {
    V = cpd_als(T, rank, opts.als).factors.V;
    res.notes.push_back("starting V from unstructured ALS");
  }
  V = detail::normalized_columns(std::move(V));

  const double tn = T.norm();
  if (tn == 0.0) {
    res.V = V;
    res.W.coeffs = Eigen::MatrixXd::Zero(degree - 1, rank);
    res.history = {0.0};
    res.converged = true;
    res.notes.push_back("zero tensor: no curvature information, V left at its start value");
    return res;
  }

  StructuredProblem prob(T, Z, rank, degree);
  auto cur = prob.solve_coeffs(V);
  res.history.push_back(std::sqrt(cur.cost) / tn);

  const Eigen::Index Pv = prob.m() * prob.r();
  double lambda = opts.lambda0;
  Eigen::MatrixXd R_vv;
  Eigen::VectorXd r_v;
  for (int it = 1; it <= opts.max_iter; ++it) {
    if (std::sqrt(cur.cost) <= 1e-15 * tn) {
      res.converged = true;
      break;
    }
    prob.projected_system(V, cur.W, R_vv, r_v);
    Eigen::VectorXd D = R_vv.colwise().squaredNorm().transpose();
    const double dmax = D.maxCoeff();
    const double floor = dmax > 0.0 ? 1e-12 * dmax : 1.0;
    D = D.cwiseMax(floor);

    bool accepted = false;
    while (lambda <= 1e16) {
      Eigen::MatrixXd A(2 * Pv, Pv);
      A.topRows(Pv) = R_vv;
      A.bottomRows(Pv) = (lambda * D).cwiseSqrt().asDiagonal();
      Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * Pv);
      b.head(Pv) = -r_v;
      const Eigen::VectorXd delta = A.householderQr().solve(b);
      Eigen::MatrixXd Vc = V + Eigen::Map<const Eigen::MatrixXd>(delta.data(), prob.m(), prob.r());
      Vc = detail::normalized_columns(std::move(Vc));
      try {
        auto cand = prob.solve_coeffs(Vc);
        if (cand.cost < cur.cost) {
          const double decrease = (cur.cost - cand.cost) / cur.cost;
          V = std::move(Vc);
          cur = std::move(cand);
          lambda = std::max(lambda / opts.lambda_factor, 1e-15);
          accepted = true;
          res.iterations = it;
          res.history.push_back(std::sqrt(cur.cost) / tn);
          if (decrease < opts.rel_tol) res.converged = true;
          break;
        }
      } catch (const NumericError&) {
        // singular coefficient system at the trial point: treat as rejected
      }
      lambda *= opts.lambda_factor;
    }
    if (!accepted) {
      res.stagnated = true;
      res.converged = true;
      res.notes.push_back("LM could not decrease the structured cost further");
      break;
    }
    if (res.converged) break;
  }
  if (!res.converged) res.notes.push_back("structured CPD hit max_iter");
  res.V = V;
  res.W = cur.W;
  res.relative_error = std::sqrt(cur.cost) / tn;
  return res;
}

}  // namespace dnarx::cpd
