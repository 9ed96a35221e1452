#include <cmath>
#include <stdexcept>

#include "dnarx/decoupler.hpp"
#include "dnarx/errors.hpp"
#include "dnarx/linalg.hpp"

namespace dnarx::decouple {

void DecoupledModel::validate() const {
  cfg.validate();
  if (V.rows() != cfg.input_dim()) {
    throw DimensionError("decoupled model: V has " + std::to_string(V.rows()) +
                         " rows, regressor dimension is " + std::to_string(cfg.input_dim()));
  }
  if (static_cast<Eigen::Index>(branches.size()) != V.cols() || V.cols() < 1) {
    throw DimensionError("decoupled model: need one branch per column of V");
  }
  for (const auto& g : branches) {
    if (g.degree() != branches.front().degree()) {
      throw DimensionError("decoupled model: branches must share one degree");
    }
  }
}

double DecoupledModel::evaluate(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (z.size() != V.rows()) throw DimensionError("decoupled model: regressor length mismatch");
  double y = c0;
  for (Eigen::Index i = 0; i < V.cols(); ++i) {
    y += branches[static_cast<std::size_t>(i)].eval(V.col(i).dot(z));
  }
  return y;
}

Eigen::VectorXd DecoupledModel::evaluate_rows(const Eigen::MatrixXd& Z) const {
  Eigen::VectorXd out(Z.rows());
  for (Eigen::Index k = 0; k < Z.rows(); ++k) out[k] = evaluate(Z.row(k).transpose());
  return out;
}

std::uint64_t DecoupledModel::param_count() const {
  return count_dpnarx_params(static_cast<int>(V.rows()), degree(), static_cast<int>(V.cols()));
}

narx::Nonlinearity DecoupledModel::as_nonlinearity() const {
  return [m = *this](const Eigen::Ref<const Eigen::VectorXd>& z) { return m.evaluate(z); };
}

void DecoupledModel::normalize() {
  for (Eigen::Index i = 0; i < V.cols(); ++i) {
    const double n = V.col(i).norm();
    if (n == 0.0) continue;
    Eigen::Index imax = 0;
    V.col(i).cwiseAbs().maxCoeff(&imax);
    const double a = V(imax, i) < 0.0 ? -n : n;
    if (a == 1.0) continue;
    V.col(i) /= a;
    // g(v^T z) = g(a * x_new), so c_j picks up a^j
    auto& c = branches[static_cast<std::size_t>(i)].mutable_coeffs();
    double p = 1.0;
    for (auto& cj : c) {
      p *= a;
      cj *= p;
    }
  }
}

std::uint64_t count_dpnarx_params(int m, int M, int r) {
  if (m < 1 || M < 1 || r < 1) throw DimensionError("count_dpnarx_params: arguments must be >= 1");
  return static_cast<std::uint64_t>(m + M) * static_cast<std::uint64_t>(r) + 1;
}

cpd::Tensor3 build_hessian_tensor(const poly::CoupledPolynomial& p, const Eigen::MatrixXd& Z) {
  if (Z.cols() != p.input_dim()) {
    throw DimensionError("build_hessian_tensor: Z has " + std::to_string(Z.cols()) +
                         " columns, polynomial expects " + std::to_string(p.input_dim()));
  }
  const Eigen::Index m = Z.cols();
  cpd::Tensor3 T(m, m, Z.rows(), true);
  for (Eigen::Index k = 0; k < Z.rows(); ++k) T.slice(k) = p.hessian(Z.row(k).transpose());
  return T;
}

poly::CoupledPolynomial expand_decoupled(const DecoupledModel& model, int max_degree) {
  model.validate();
  const int m = static_cast<int>(model.V.rows());
  const int M = model.degree();
  if (M > max_degree) {
    throw DimensionError("expand_decoupled: branch degree " + std::to_string(M) +
                         " exceeds the expansion limit " + std::to_string(max_degree));
  }
  std::vector<poly::MonomialTerm> acc;
  acc.push_back({poly::Exponents(static_cast<std::size_t>(m), 0), model.c0});
  for (Eigen::Index i = 0; i < model.V.cols(); ++i) {
    std::vector<poly::MonomialTerm> lin;
    for (int p = 0; p < m; ++p) {
      poly::Exponents e(static_cast<std::size_t>(m), 0);
      e[static_cast<std::size_t>(p)] = 1;
      lin.push_back({e, model.V(p, i)});
    }
    const poly::CoupledPolynomial x(m, 1, lin);
    poly::CoupledPolynomial xp = x;
    const auto c = model.branches[static_cast<std::size_t>(i)].coeffs();
    for (int j = 1; j <= M; ++j) {
      if (j > 1) xp = multiply(xp, x);
      for (const auto& t : xp.terms()) {
        acc.push_back({t.exponents, c[static_cast<std::size_t>(j - 1)] * t.coefficient});
      }
    }
  }
  return poly::CoupledPolynomial(m, M, std::move(acc));
}

Eigen::MatrixXd branch_design(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Z, int degree) {
  if (Z.cols() != V.rows()) throw DimensionError("branch_design: Z and V disagree");
  if (degree < 1) throw DimensionError("branch_design: degree must be >= 1");
  const Eigen::Index r = V.cols();
  const Eigen::MatrixXd X = Z * V;
  Eigen::MatrixXd D(Z.rows(), 1 + r * degree);
  D.col(0).setOnes();
  for (Eigen::Index l = 0; l < r; ++l) {
    D.col(1 + l * degree) = X.col(l);
    for (int j = 1; j < degree; ++j) {
      D.col(1 + l * degree + j) = D.col(l * degree + j).cwiseProduct(X.col(l));
    }
  }
  return D;
}

BranchSolve solve_branch_coefficients(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Z,
                                      const Eigen::VectorXd& y, int degree) {
  if (Z.rows() != y.size()) throw DimensionError("solve_branch_coefficients: Z and y disagree");
  const Eigen::MatrixXd X = branch_design(V, Z, degree);
  const auto ls = linalg::lstsq(X, y);
  BranchSolve out;
  out.c0 = ls.coef[0];
  for (Eigen::Index l = 0; l < V.cols(); ++l) {
    std::vector<double> c(static_cast<std::size_t>(degree));
    for (int j = 0; j < degree; ++j) c[static_cast<std::size_t>(j)] = ls.coef[1 + l * degree + j];
    out.branches.emplace_back(std::move(c));
  }
  out.residual = ls.residual;
  out.condition = ls.condition;
  return out;
}

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::random: return "random";
    case InitMode::cpd: return "cpd";
    case InitMode::cpd_structured: return "cpd_structured";
  }
  return "unknown";
}

InitMode init_mode_from_string(const std::string& s) {
  if (s == "random") return InitMode::random;
  if (s == "cpd" || s == "unstructured") return InitMode::cpd;
  if (s == "cpd_structured" || s == "structured") return InitMode::cpd_structured;
  throw ParseError("unknown init mode '" + s + "' (random | cpd | cpd_structured)");
}

cpd::FactorAmbiguityReport demo_jacobian_matrix_nonuniqueness(const DecoupledModel& model,
                                                              const Eigen::MatrixXd& Z,
                                                              const Eigen::MatrixXd& transform) {
  model.validate();
  if (Z.cols() != model.V.rows()) throw DimensionError("demo_jacobian: Z and V disagree");
  const Eigen::MatrixXd X = Z * model.V;
  Eigen::MatrixXd W(Z.rows(), model.rank());
  for (Eigen::Index k = 0; k < Z.rows(); ++k) {
    for (Eigen::Index i = 0; i < model.rank(); ++i) {
      W(k, i) = model.branches[static_cast<std::size_t>(i)].eval(X(k, i), 1);
    }
  }
  return cpd::jacobian_factor_ambiguity(model.V, W, transform);
}

}  // namespace dnarx::decouple
