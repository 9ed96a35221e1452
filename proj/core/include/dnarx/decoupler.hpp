#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dnarx/cpd.hpp"
#include "dnarx/narx.hpp"
#include "dnarx/poly.hpp"
#include "dnarx/tensor3.hpp"

namespace dnarx::decouple {

/// y_hat(z) = c0 + sum_i g_i(v_i^T z).
struct DecoupledModel {
  Eigen::MatrixXd V;                          ///< m x r, unit-norm columns
  std::vector<poly::UnivariatePoly> branches; ///< r polynomials of equal degree M
  double c0 = 0.0;
  narx::NarxConfig cfg;

  Eigen::Index rank() const noexcept { return V.cols(); }
  int degree() const noexcept { return branches.empty() ? 0 : branches.front().degree(); }
  void validate() const;

  double evaluate(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Eigen::VectorXd evaluate_rows(const Eigen::MatrixXd& Z) const;
  /// (m + M) r + 1
  std::uint64_t param_count() const;
  narx::Nonlinearity as_nonlinearity() const;

  /// Unit-norm columns with the largest-magnitude entry positive; the scale
  /// is pushed into the branch coefficients, so outputs are unchanged.
  void normalize();
};

std::uint64_t count_dpnarx_params(int m, int M, int r);

/// Stacked Hessians H(:, :, k) = d^2 F / dz dz^T at row k of Z.
cpd::Tensor3 build_hessian_tensor(const poly::CoupledPolynomial& p, const Eigen::MatrixXd& Z);

/// Multinomial expansion of the decoupled model into monomial form.
/// Throws DimensionError when M exceeds `max_degree`.
poly::CoupledPolynomial expand_decoupled(const DecoupledModel& model, int max_degree = 16);

/// Least-squares offset and branch coefficients for a fixed V.
struct BranchSolve {
  double c0 = 0.0;
  std::vector<poly::UnivariatePoly> branches;
  Eigen::VectorXd residual;  ///< y - y_hat
  double condition = 0.0;
};

BranchSolve solve_branch_coefficients(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Z,
                                      const Eigen::VectorXd& y, int degree);

/// [1, X_1 .. X_r] with X_i(t, j-1) = (v_i^T z(t))^j.
Eigen::MatrixXd branch_design(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Z, int degree);

enum class InitMode { random, cpd, cpd_structured };

std::string to_string(InitMode mode);
InitMode init_mode_from_string(const std::string& s);

struct InitOptions {
  std::size_t hessian_points = 4096;  ///< uniform-stride subsample of the regressors
  cpd::AlsOptions als;
  cpd::StructuredOptions structured;
  std::uint64_t seed = 0;             ///< random init and rank-deficiency jitter
};

struct InitResult {
  DecoupledModel model;
  std::vector<std::string> notes;
  std::size_t hessian_points = 0;
  double cpd_relative_error = 0.0;
};

/// Hessian tensor -> CPD -> V, then the branch coefficients by least squares.
InitResult init_from_cpd(const poly::CoupledPolynomial& p, const narx::RegressorTable& tab,
                         const narx::NarxConfig& cfg, int r, int M, InitMode mode,
                         const InitOptions& opts = {});

/// Standard-normal V with normalized columns, coefficients by least squares.
InitResult init_random(const narx::RegressorTable& tab, const narx::NarxConfig& cfg, int r, int M,
                       std::uint64_t seed);

struct SlsOptions {
  int max_iter = 500;
  double rel_tol = 1e-10;   ///< stop when the relative cost decrease is below this
  double abs_tol = 0.0;     ///< stop when the cost falls below this
  double lambda0 = 1e-3;
  double lambda_factor = 10.0;
  std::uint64_t seed = 0;   ///< jitter applied when X is rank deficient
};

struct SlsReport {
  std::vector<double> cost;  ///< ||y - y_hat||^2, initial value then one per accepted step
  int iterations = 0;        ///< accepted steps
  InitMode initializer = InitMode::random;
  double condition = 0.0;    ///< of the final branch design X
  bool converged = false;
  std::vector<std::string> notes;
};

struct SlsResult {
  DecoupledModel model;
  SlsReport report;
};

/// Separable least squares over V with c eliminated, Levenberg-Marquardt on
/// the projected Jacobian. V is renormalized after every accepted step.
SlsResult refine_sls(const DecoupledModel& init, const narx::RegressorTable& tab,
                     const SlsOptions& opts = {}, InitMode initializer = InitMode::random);

/// e(V) = X(V) c_hat(V) - y.
Eigen::VectorXd separated_residual(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Z,
                                   const Eigen::VectorXd& y, int degree);

/// d e / d vec(V), column l*m + p for V(p, l). `exact` selects the full
/// projection derivative; otherwise the first-order form (I - P) J_v.
Eigen::MatrixXd separated_jacobian(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Z,
                                   const Eigen::VectorXd& y, int degree, bool exact);

/// J_v: columns g_l'(x_l(t)) z_p(t) for fixed coefficients.
Eigen::MatrixXd coefficient_fixed_jacobian(const DecoupledModel& model, const Eigen::MatrixXd& Z);

struct RestartSummary {
  std::uint64_t seed = 0;
  int iterations = 0;
  double final_cost = 0.0;
  bool converged = false;
  bool failed = false;
  std::string failure;
};

/// Independent random inits refined by SLS; restarts run concurrently.
std::vector<RestartSummary> random_restarts(const narx::RegressorTable& tab,
                                            const narx::NarxConfig& cfg, int r, int M,
                                            int restarts, std::uint64_t seed,
                                            const SlsOptions& sls, unsigned threads = 1);

struct Algorithm1Options {
  int r = 2;
  int M = 3;
  InitMode init_mode = InitMode::cpd_structured;
  narx::SelectionPolicy selection = narx::Frols{};
  InitOptions init;
  SlsOptions sls;
  /// Work in units where u and y have unit standard deviation; the returned
  /// models are mapped back to the original units.
  bool standardize = true;
};

struct FitPair {
  std::optional<double> prediction;
  std::optional<double> simulation;
  bool simulation_unstable = false;
};

struct Algorithm1Report {
  std::size_t candidate_count = 0;
  std::size_t coupled_terms = 0;
  std::uint64_t coupled_params = 0;
  std::uint64_t decoupled_params = 0;
  std::size_t hessian_points = 0;
  double cpd_relative_error = 0.0;
  FitPair coupled;
  FitPair initial;
  FitPair final_model;
  std::optional<FitPair> validation;  ///< final model on the held-out record
  SlsReport sls;
  std::vector<std::string> notes;
};

struct Algorithm1Result {
  poly::CoupledPolynomial coupled;
  DecoupledModel initial;
  DecoupledModel model;
  Algorithm1Report report;
};

/// Per-signal scaling used to keep the Vandermonde blocks well conditioned.
/// Only scales (no centering), so polynomial structure is preserved.
struct Standardization {
  double su = 1.0;
  double sy = 1.0;
  Eigen::VectorXd zscale;  ///< per regressor entry: sy for output lags, su for input lags

  narx::Dataset apply(const narx::Dataset& d) const;
  poly::CoupledPolynomial to_standard(const poly::CoupledPolynomial& p) const;
  poly::CoupledPolynomial from_standard(const poly::CoupledPolynomial& p) const;
  DecoupledModel from_standard(const DecoupledModel& m) const;
};

/// Unit scaling when `enabled` is false.
Standardization make_standardization(const narx::Dataset& d, const narx::NarxConfig& cfg,
                                     bool enabled);

/// Step 1: coupled P-NARX fit; the model is returned in original units.
narx::FitResult fit_coupled(const narx::Dataset& d, const narx::NarxConfig& cfg,
                            const narx::SelectionPolicy& selection, bool standardize = true);

struct DecoupleResult {
  DecoupledModel initial;  ///< original units
  DecoupledModel model;    ///< original units
  SlsReport sls;
  std::size_t hessian_points = 0;
  double cpd_relative_error = 0.0;
  std::vector<std::string> notes;
};

/// Steps 2-5 starting from a coupled model in original units.
DecoupleResult decouple_coupled(const poly::CoupledPolynomial& coupled, const narx::Dataset& d,
                                const narx::NarxConfig& cfg, const Algorithm1Options& opts);

/// fit coupled -> Hessian -> CPD -> SLS. Errors carry the stage name.
Algorithm1Result run_algorithm1(const narx::Dataset& d, const narx::NarxConfig& cfg,
                                const Algorithm1Options& opts,
                                const narx::Dataset* validation = nullptr);

/// FIT of one-step prediction and free-run simulation of `f` on `d`.
FitPair evaluate_fits(const narx::Nonlinearity& f, const narx::Dataset& d,
                      const narx::NarxConfig& cfg);

/// Stacked gradients J = V W^T with W(k, i) = g_i'(v_i^T z(k)) and the
/// factor ambiguity under `transform`.
cpd::FactorAmbiguityReport demo_jacobian_matrix_nonuniqueness(const DecoupledModel& model,
                                                              const Eigen::MatrixXd& Z,
                                                              const Eigen::MatrixXd& transform);

// plot data

/// Branch curve over the observed input range: x rescaled to [-1, 1], the
/// best linear part removed and the remainder scaled to max magnitude 1.
struct BranchCurve {
  Eigen::VectorXd x_normalized;
  Eigen::VectorXd g_nonlinear;
  double x_min = 0.0;
  double x_max = 0.0;
};

BranchCurve branch_curve(const DecoupledModel& model, const Eigen::MatrixXd& Z, Eigen::Index branch,
                         int points = 201);

/// v_i split into its output-lag and input-lag FIR filters.
struct FirResponse {
  Eigen::VectorXd omega;    ///< rad/sample in [0, pi]
  Eigen::VectorXd hz;       ///< omega * fs / (2 pi)
  Eigen::VectorXd mag_y;    ///< |sum_k v(k) e^{-i omega k}| over y lags 1..n_y
  Eigen::VectorXd mag_u;    ///< same over u lags n_k..n_k+n_u-1
};

FirResponse fir_response(const DecoupledModel& model, Eigen::Index branch, double sample_rate_hz,
                         int points = 512);

}  // namespace dnarx::decouple
