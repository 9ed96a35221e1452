#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "dnarx/poly.hpp"

namespace dnarx::narx {

/// Lag structure of a NARX model. The regressor vector is
///   z(t) = [y(t-1) .. y(t-n_y), u(t-n_k) .. u(t-n_k-n_u+1)]
/// with outputs first, then inputs.
struct NarxConfig {
  int n_u = 0;
  int n_y = 0;
  int n_k = 0;
  int degree = 3;

  int input_dim() const noexcept { return n_u + n_y; }
  /// Number of leading samples of every segment that cannot form a row.
  int lag() const noexcept;
  void validate() const;

  friend bool operator==(const NarxConfig&, const NarxConfig&) = default;
};

/// Half-open sample range [begin, end).
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Paired input/output record. Regressor rows never straddle a segment
/// boundary; an empty segment list means the whole record is one segment.
struct Dataset {
  Eigen::VectorXd u;
  Eigen::VectorXd y;
  double sample_rate_hz = 1.0;
  std::vector<Segment> segments;

  std::size_t size() const noexcept { return static_cast<std::size_t>(u.size()); }
  std::vector<Segment> effective_segments() const;
  void validate() const;

  /// Copy of the listed segments only, re-indexed from zero.
  Dataset select_segments(const std::vector<std::size_t>& which) const;
};

/// Runs of at least `min_run` consecutive samples with |u| <= tolerance are
/// separators; everything else becomes a segment.
std::vector<Segment> segments_from_zero_runs(const Eigen::VectorXd& u,
                                             std::size_t min_run = 100,
                                             double tolerance = 0.0);

struct RegressorTable {
  Eigen::MatrixXd Z;        ///< N x m, row k is z(t_k)
  Eigen::VectorXd target;   ///< y(t_k)
  std::vector<std::size_t> origin_index;  ///< t_k in the source record

  Eigen::Index rows() const noexcept { return Z.rows(); }
  /// Uniform-stride subset of at most `max_rows` rows (first row kept).
  RegressorTable subsample(std::size_t max_rows) const;
};

RegressorTable build_regressors(const Dataset& d, const NarxConfig& cfg);

/// Classical orthogonal forward regression: greedy selection by
/// error-reduction ratio, then a joint least-squares refit.
struct Frols {
  double err_threshold = 1e-4;  ///< stop when 1 - sum(ERR) <= err_threshold
  std::size_t max_terms = 0;    ///< 0 means "all candidates"
};

/// std::monostate selects plain least squares over every candidate monomial.
using SelectionPolicy = std::variant<std::monostate, Frols>;

struct FitResult {
  poly::CoupledPolynomial model;
  Eigen::VectorXd residual;          ///< target - prediction on the table
  std::size_t candidate_count = 0;   ///< monomials considered
  std::vector<double> err;           ///< ERR of each selected term (FROLS)
  std::vector<std::size_t> selection_order;  ///< candidate indices, as chosen
  double condition = 0.0;            ///< 2-norm condition of the final design
};

FitResult fit_full_pnarx(const RegressorTable& tab, const NarxConfig& cfg,
                         const SelectionPolicy& selection = std::monostate{});

/// Design matrix with one column per exponent vector, rows of Z as points.
Eigen::MatrixXd monomial_design(const Eigen::MatrixXd& Z,
                                const std::vector<poly::Exponents>& monomials);

/// 1 + m + m(m+1)/2 + m(m+1)(m+2)/6; only defined for degree 3.
std::uint64_t count_pnarx_params(int m, int degree = 3);
/// binomial(m + degree, degree), valid for every degree.
std::uint64_t count_pnarx_params_general(int m, int degree);

/// Anything that maps a regressor vector to a predicted output.
using Nonlinearity = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;

Nonlinearity as_nonlinearity(const poly::CoupledPolynomial& p);

/// y_hat(t) = F(z(t)) with z built from measured outputs. One value per
/// regressor row, aligned with build_regressors(d, cfg).
Eigen::VectorXd predict_one_step(const Nonlinearity& model, const Dataset& d,
                                 const NarxConfig& cfg);

struct SimulationOptions {
  /// Replaces the measured initial outputs of the first segment; must have
  /// n_y entries when given (most recent last).
  std::optional<Eigen::VectorXd> y_init;
  /// Divergence is declared when |y_hat| > blowup_factor * reference_std.
  double blowup_factor = 1e6;
  /// 0 means "std of the measured y of the simulated record".
  double reference_std = 0.0;
};

struct SimulationResult {
  Eigen::VectorXd y_hat;  ///< aligned with build_regressors rows; NaN after divergence
  bool unstable = false;
  std::vector<std::size_t> unstable_segments;
};

/// Free-run simulation: past outputs in z(t) come from the model itself,
/// inputs are measured. Every segment restarts from its measured outputs.
SimulationResult simulate_free_run(const Nonlinearity& model, const Dataset& d,
                                   const NarxConfig& cfg,
                                   const SimulationOptions& opts = {});

}  // namespace dnarx::narx
