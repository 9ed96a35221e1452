#include "dnarx/metrics.hpp"

#include <cmath>

#include "dnarx/errors.hpp"

namespace dnarx::bench {

Metric compute_metrics(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_hat) {
  if (y_true.size() != y_hat.size()) throw DimensionError("compute_metrics: length mismatch");
  if (y_true.size() < 2) throw DimensionError("compute_metrics: need at least two points");
  Metric m;
  m.n_points = static_cast<std::size_t>(y_true.size());
  const double mean = y_true.mean();
  double se = 0.0;
  double sv = 0.0;
  for (Eigen::Index i = 0; i < y_true.size(); ++i) {
    const double e = y_true[i] - y_hat[i];
    const double c = y_true[i] - mean;
    se += e * e;
    sv += c * c;
  }
  m.e_rms = std::sqrt(se / static_cast<double>(m.n_points));
  if (sv > 0.0) m.fit_percent = 100.0 * (1.0 - std::sqrt(se / sv));
  return m;
}

}  // namespace dnarx::bench
