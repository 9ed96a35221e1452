#include "dnarx/tensor3.hpp"

#include <cmath>
#include <cstdio>

#include <Eigen/LU>

#include "dnarx/cpd.hpp"
#include "dnarx/errors.hpp"
#include "dnarx/linalg.hpp"

namespace dnarx::cpd {

Tensor3::Tensor3(Eigen::Index I, Eigen::Index J, Eigen::Index K, bool symmetric)
    : dims_{I, J, K}, data_(static_cast<std::size_t>(I * J * K), 0.0), symmetric_(symmetric) {
  if (I < 0 || J < 0 || K < 0) throw DimensionError("tensor dims must be non-negative");
  if (symmetric && I != J) throw DimensionError("symmetric tensor needs I == J");
}

Tensor3::Tensor3(Eigen::Index I, Eigen::Index J, Eigen::Index K, std::vector<double> data,
                 bool symmetric)
    : dims_{I, J, K}, data_(std::move(data)) {
  if (I < 0 || J < 0 || K < 0) throw DimensionError("tensor dims must be non-negative");
  if (data_.size() != static_cast<std::size_t>(I * J * K)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " != I*J*K = " + std::to_string(I * J * K));
  }
  if (symmetric) mark_symmetric();
}

void Tensor3::mark_symmetric() {
  if (dims_[0] != dims_[1]) throw DimensionError("symmetric tensor needs I == J");
  for (Eigen::Index k = 0; k < dims_[2]; ++k) {
    for (Eigen::Index i = 0; i < dims_[0]; ++i) {
      for (Eigen::Index j = i + 1; j < dims_[1]; ++j) {
        if ((*this)(i, j, k) != (*this)(j, i, k)) {
          throw DimensionError("tensor flagged symmetric but T(i,j,k) != T(j,i,k)");
        }
      }
    }
  }
  symmetric_ = true;
}

double Tensor3::norm() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

bool Tensor3::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::uint64_t jacobian_storage_elements(std::uint64_t N, std::uint64_t r, std::uint64_t m,
                                        std::uint64_t M) {
  return N * r * m * m * (m + M - 2);
}

void check_jacobian_budget(std::uint64_t N, std::uint64_t r, std::uint64_t m, std::uint64_t M,
                           double budget_bytes) {
  const auto elements = jacobian_storage_elements(N, r, m, M);
  const double bytes = 8.0 * static_cast<double>(elements);
  if (bytes > budget_bytes) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "Hessian Jacobian needs %llu elements (%.4g GB at 8 bytes/element), "
                  "over the %.4g GB budget",
                  static_cast<unsigned long long>(elements), bytes / 1e9, budget_bytes / 1e9);
    throw BudgetError(buf, elements, bytes);
  }
}

FactorAmbiguityReport jacobian_factor_ambiguity(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W,
                                                const Eigen::MatrixXd& transform) {
  if (V.cols() != W.cols() || transform.rows() != V.cols() || transform.cols() != V.cols()) {
    throw DimensionError("jacobian_factor_ambiguity: shapes of V, W and transform disagree");
  }
  FactorAmbiguityReport rep;
  rep.J = V * W.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(transform);
  if (!lu.isInvertible()) throw NumericError("jacobian_factor_ambiguity: transform is singular");
  rep.V_alt = V * lu.inverse();
  rep.Wt_alt = transform * W.transpose();
  const double jn = rep.J.norm();
  const double err = (rep.V_alt * rep.Wt_alt - rep.J).norm();
  rep.reconstruction_error = jn > 0.0 ? err / jn : err;
  rep.transform_condition = linalg::condition_number(transform);
  const double vn = V.norm();
  rep.factor_change = vn > 0.0 ? (rep.V_alt - V).norm() / vn : 0.0;
  return rep;
}

}  // namespace dnarx::cpd
