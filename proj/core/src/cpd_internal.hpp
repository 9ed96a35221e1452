#pragma once

#include <Eigen/Core>

#include "dnarx/tensor3.hpp"

namespace dnarx::cpd::detail {

/// Scales `col` to unit norm (skipped when already within 1e-12) and flips
/// it so its largest-magnitude entry is positive. Returns the factor the
/// column was divided by, signed.
double normalize_column(Eigen::Ref<Eigen::VectorXd> col);
Eigen::MatrixXd normalized_columns(Eigen::MatrixXd V);

/// out(k, n) = a_n^T T_k b_n
Eigen::MatrixXd mode3_contract(const Tensor3& T, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);
/// sum_k T_k B diag(W(k, :))
Eigen::MatrixXd mode1_contract(const Tensor3& T, const Eigen::MatrixXd& B, const Eigen::MatrixXd& W);
/// sum_k T_k^T A diag(W(k, :))
Eigen::MatrixXd mode2_contract(const Tensor3& T, const Eigen::MatrixXd& A, const Eigen::MatrixXd& W);
/// ||T - sum_n w_n (x) a_n (x) b_n||_F^2
double residual_sq(const Tensor3& T, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                   const Eigen::MatrixXd& W);
Eigen::MatrixXd solve_right(const Eigen::MatrixXd& rhs, const Eigen::MatrixXd& G);

}  // namespace dnarx::cpd::detail
