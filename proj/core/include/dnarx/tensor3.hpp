#pragma once

#include <vector>

#include <Eigen/Core>

namespace dnarx::cpd {

/// Dense I x J x K array. Entry (i, j, k) lives at i + I*(j + J*k), so each
/// frontal slice T(:, :, k) is a contiguous column-major I x J matrix and k
/// varies slowest.
class Tensor3 {
 public:
  using SliceMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstSliceMap = Eigen::Map<const Eigen::MatrixXd>;

  Tensor3() = default;
  Tensor3(Eigen::Index I, Eigen::Index J, Eigen::Index K, bool symmetric = false);
  /// Takes ownership of `data`; validates length and, when `symmetric` is
  /// set, that I == J and every slice is exactly symmetric.
  Tensor3(Eigen::Index I, Eigen::Index J, Eigen::Index K, std::vector<double> data,
          bool symmetric);

  Eigen::Index dim(int mode) const noexcept { return dims_[mode]; }
  bool symmetric() const noexcept { return symmetric_; }

  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const noexcept {
    return data_[static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k))];
  }
  double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) noexcept {
    return data_[static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k))];
  }

  ConstSliceMap slice(Eigen::Index k) const noexcept {
    return ConstSliceMap(data_.data() + dims_[0] * dims_[1] * k, dims_[0], dims_[1]);
  }
  SliceMap slice(Eigen::Index k) noexcept {
    return SliceMap(data_.data() + dims_[0] * dims_[1] * k, dims_[0], dims_[1]);
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& mutable_data() noexcept { return data_; }

  double norm() const noexcept;
  bool all_finite() const noexcept;

  /// Sets the flag after checking I == J and exact slice symmetry.
  void mark_symmetric();

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  Eigen::Index dims_[3] = {0, 0, 0};
  std::vector<double> data_;
  bool symmetric_ = false;
};

}  // namespace dnarx::cpd
