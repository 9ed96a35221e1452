#include "dnarx/linalg.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "dnarx/errors.hpp"

namespace dnarx::linalg {

double condition_number(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / smin;
}

LeastSquares lstsq(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw DimensionError("lstsq: X rows != y length");
  if (X.rows() < X.cols()) {
    throw NumericError("lstsq: fewer rows (" + std::to_string(X.rows()) +
                       ") than unknowns (" + std::to_string(X.cols()) + ")");
  }
  Eigen::VectorXd scale(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double n = X.col(j).norm();
    scale[j] = n > 0.0 ? 1.0 / n : 0.0;
  }
  const Eigen::MatrixXd Xs = X * scale.asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);

  LeastSquares out;
  out.rank = qr.rank();
  const Eigen::Index n = X.cols();
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(n, n).triangularView<Eigen::Upper>();
  out.condition = condition_number(R);
  if (out.rank < n || (scale.array() == 0.0).any()) {
    throw NumericError("least-squares design is rank deficient (rank " +
                           std::to_string(out.rank) + " of " + std::to_string(n) +
                           ", condition ~" + std::to_string(out.condition) + ")",
                       out.condition);
  }
  out.coef = scale.asDiagonal() * qr.solve(y);
  out.residual = y - X * out.coef;
  return out;
}

namespace {
constexpr Eigen::Index kBlockRows = 512;
}

StreamingQR::StreamingQR(Eigen::Index cols)
    : cols_(cols),
      R_(Eigen::MatrixXd::Zero(cols + 1, cols + 1)),
      pending_(kBlockRows + cols + 1, cols + 1) {}

void StreamingQR::add_rows(const Eigen::MatrixXd& A_block, const Eigen::VectorXd& b_block) {
  if (A_block.cols() != cols_ || A_block.rows() != b_block.size()) {
    throw DimensionError("StreamingQR: block shape mismatch");
  }
  for (Eigen::Index i = 0; i < A_block.rows(); ++i) {
    if (pending_rows_ == kBlockRows) flush();
    pending_.row(pending_rows_).head(cols_) = A_block.row(i);
    pending_(pending_rows_, cols_) = b_block[i];
    ++pending_rows_;
  }
}

void StreamingQR::flush() const {
  if (pending_rows_ == 0) return;
  const Eigen::Index n = cols_ + 1;
  Eigen::MatrixXd stacked(n + pending_rows_, n);
  stacked.topRows(n) = R_;
  stacked.bottomRows(pending_rows_) = pending_.topRows(pending_rows_);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
  R_ = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  pending_rows_ = 0;
}

Eigen::VectorXd StreamingQR::solve() const {
  flush();
  const auto R = R_.topLeftCorner(cols_, cols_);
  const double dmax = R.diagonal().cwiseAbs().maxCoeff();
  const double dmin = R.diagonal().cwiseAbs().minCoeff();
  if (!(dmax > 0.0) || dmin <= dmax * 1e3 * std::numeric_limits<double>::epsilon()) {
    throw NumericError("streaming least squares: singular triangular factor", condition());
  }
  return R.triangularView<Eigen::Upper>().solve(R_.col(cols_).head(cols_));
}

double StreamingQR::residual_squared() const {
  flush();
  const double r = R_(cols_, cols_);
  return r * r;
}

const Eigen::MatrixXd& StreamingQR::triangular() const {
  flush();
  return R_;
}

double StreamingQR::condition() const {
  flush();
  return condition_number(R_.topLeftCorner(cols_, cols_));
}

}  // namespace dnarx::linalg
