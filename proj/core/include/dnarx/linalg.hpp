#pragma once

#include <Eigen/Core>

namespace dnarx::linalg {

struct LeastSquares {
  Eigen::VectorXd coef;
  Eigen::VectorXd residual;  ///< y - X coef
  Eigen::Index rank = 0;
  double condition = 0.0;    ///< of the column-equilibrated design
};

/// min ||y - X c|| by column-pivoted Householder QR on the
/// column-equilibrated design. Throws NumericError (carrying the condition
/// estimate) when X is numerically rank deficient.
LeastSquares lstsq(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// 2-norm condition number via SVD (intended for small matrices).
double condition_number(const Eigen::MatrixXd& A);

/// Row-streaming Householder QR of a tall matrix [A | b]. Rows are fed in
/// blocks; only the (n+1) x (n+1) triangular factor is kept, so the full
/// design never has to exist in memory.
class StreamingQR {
 public:
  explicit StreamingQR(Eigen::Index cols);

  /// Appends rows [A_block | b_block].
  void add_rows(const Eigen::MatrixXd& A_block, const Eigen::VectorXd& b_block);

  /// Least-squares solution of the accumulated system. Throws NumericError
  /// when the triangular factor is singular to working precision.
  Eigen::VectorXd solve() const;
  /// ||b - A x||^2 at the least-squares solution.
  double residual_squared() const;
  double condition() const;
  /// The (cols+1) x (cols+1) triangular factor of [A | b].
  const Eigen::MatrixXd& triangular() const;
  Eigen::Index cols() const noexcept { return cols_; }

 private:
  void flush() const;

  Eigen::Index cols_;
  mutable Eigen::MatrixXd R_;        // (cols+1) x (cols+1), upper triangular
  mutable Eigen::MatrixXd pending_;  // buffered rows not yet folded in
  mutable Eigen::Index pending_rows_ = 0;
};

}  // namespace dnarx::linalg
