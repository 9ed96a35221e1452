#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dnarx/tensor3.hpp"

namespace dnarx::cpd {

/// Rank-r CPD T ~ sum_n w_n (x) a_n (x) b_n with a_n = v_n for shared modes.
/// V is m x r (mode 1), W is N x r (mode 3). When the two leading modes are
/// factored separately, the mode-2 factor is held in `V2`.
struct CpdFactors {
  Eigen::MatrixXd V;
  Eigen::MatrixXd W;
  std::optional<Eigen::MatrixXd> V2;

  bool shared_modes() const noexcept { return !V2.has_value(); }
  const Eigen::MatrixXd& mode2() const noexcept { return V2 ? *V2 : V; }
  Eigen::Index rank() const noexcept { return V.cols(); }

  /// Unit 2-norm columns in V (and V2), sign chosen so the largest-magnitude
  /// entry is positive, scale pushed into W. Idempotent bit for bit.
  void normalize();

  Tensor3 reconstruct() const;
};

/// ||T - T_hat||_F / ||T||_F, or the absolute error when T is zero.
double relative_error(const Tensor3& T, const CpdFactors& f);

struct AlsOptions {
  int max_iter = 1000;
  double tol = 1e-12;        ///< stop when the relative error changes less than this
  int restarts = 5;
  std::uint64_t seed = 0;
  bool shared_modes = true;  ///< one factor for modes 1 and 2
  unsigned threads = 1;      ///< restarts run concurrently up to this count
  std::optional<Eigen::MatrixXd> initial_V;  ///< used by restart 0 when given
};

struct AlsResult {
  CpdFactors factors;
  std::vector<double> history;  ///< relative error per iteration, best restart
  bool converged = false;
  int iterations = 0;
  double relative_error = 0.0;
  int best_restart = 0;
  std::vector<double> restart_errors;
};

/// Alternating least squares. With shared modes the mixing factor is
/// updated by the linearized least-squares step followed by a backtracking
/// acceptance test, so the objective never increases within a restart.
AlsResult cpd_als(const Tensor3& T, Eigen::Index rank, const AlsOptions& opts = {});

/// Polynomial-structured mode-3 factor: column l holds g_l''(x_l(k)) with
/// x_l = Z v_l and g_l'' = sum_{j=2..M} j(j-1) c_{j,l} x^{j-2}.
/// Row a of `coeffs` holds c_{a+2, l}.
struct StructuredW {
  Eigen::MatrixXd coeffs;  ///< (M-1) x r

  int degree() const noexcept { return static_cast<int>(coeffs.rows()) + 1; }
  /// N x r matrix of second derivatives at x = Z V.
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& V) const;
};

Tensor3 reconstruct_structured(const Eigen::MatrixXd& V, const StructuredW& W,
                               const Eigen::MatrixXd& Z);

/// d vec(T_hat(:,:,k)) / d theta for one slice, m^2 rows (column-major i,j).
/// Parameter order: V column-major (V(p,l) at l*m + p), then the
/// coefficients (c_{a+2,l} at m*r + l*(M-1) + a).
Eigen::MatrixXd structured_jacobian_slice(const Eigen::MatrixXd& V, const StructuredW& W,
                                          const Eigen::Ref<const Eigen::VectorXd>& z);

struct StructuredOptions {
  int max_iter = 200;
  double rel_tol = 1e-10;
  double lambda0 = 1e-3;
  double lambda_factor = 10.0;
  double mem_budget_bytes = 4.0 * 1024.0 * 1024.0 * 1024.0;
  std::optional<Eigen::MatrixXd> initial_V;
  AlsOptions als;  ///< used to produce the starting V when none is given
};

struct StructuredResult {
  Eigen::MatrixXd V;
  StructuredW W;
  std::vector<double> history;  ///< relative error per accepted iteration
  int iterations = 0;
  bool converged = false;
  bool stagnated = false;
  double relative_error = 0.0;
  std::vector<std::string> notes;
};

/// Levenberg-Marquardt over V with the polynomial coefficients eliminated
/// by least squares at every V. T must be symmetric; rows of Z correspond to
/// the third mode of T.
StructuredResult cpd_structured(const Tensor3& T, const Eigen::MatrixXd& Z, Eigen::Index rank,
                                int degree, const StructuredOptions& opts = {});

/// Elements of the full Hessian Jacobian, N * r * m^2 * (m + M - 2).
std::uint64_t jacobian_storage_elements(std::uint64_t N, std::uint64_t r, std::uint64_t m,
                                        std::uint64_t M);

/// Throws BudgetError when 8 bytes per Jacobian element exceed the budget.
void check_jacobian_budget(std::uint64_t N, std::uint64_t r, std::uint64_t m, std::uint64_t M,
                           double budget_bytes);

/// Shows that a stacked-Jacobian matrix J = V W^T has no unique factors:
/// for any invertible T, (V T^{-1})(T W^T) reproduces J.
struct FactorAmbiguityReport {
  Eigen::MatrixXd J;
  Eigen::MatrixXd V_alt;
  Eigen::MatrixXd Wt_alt;
  double reconstruction_error = 0.0;  ///< ||V_alt Wt_alt - J||_F / ||J||_F
  double transform_condition = 0.0;
  double factor_change = 0.0;         ///< ||V_alt - V||_F / ||V||_F
};

FactorAmbiguityReport jacobian_factor_ambiguity(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W,
                                                const Eigen::MatrixXd& transform);

}  // namespace dnarx::cpd
