#pragma once

#include <optional>

#include <Eigen/Core>

namespace dnarx::bench {

struct Metric {
  /// 100 (1 - ||y - y_hat|| / ||y - mean(y)||); empty when y is constant.
  std::optional<double> fit_percent;
  /// sqrt(mean((y_hat - y)^2))
  double e_rms = 0.0;
  std::size_t n_points = 0;
};

/// Throws DimensionError on length mismatch or fewer than two points.
Metric compute_metrics(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_hat);

}  // namespace dnarx::bench
