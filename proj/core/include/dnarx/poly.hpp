#pragma once

#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace dnarx::poly {

using Exponents = std::vector<int>;

/// A single monomial c * z_1^e_1 * ... * z_m^e_m.
struct MonomialTerm {
  Exponents exponents;
  double coefficient = 0.0;

  int degree() const noexcept;
};

/// Graded lexicographic order: lower total degree first; within one degree,
/// larger leading exponents first (z1^2 < z1*z2 < z2^2).
bool graded_lex_less(const Exponents& a, const Exponents& b) noexcept;

struct GradedLexLess {
  bool operator()(const Exponents& a, const Exponents& b) const noexcept {
    return graded_lex_less(a, b);
  }
};

/// All exponent vectors over `input_dim` variables with total degree
/// <= `max_degree`, in canonical order. Size is binomial(m + d, d).
std::vector<Exponents> enumerate_monomials(int input_dim, int max_degree);

/// binomial(m + d, d): number of monomials of degree <= d in m variables.
std::uint64_t monomial_count(int input_dim, int max_degree);

/// Sparse multivariate polynomial over R^m.
///
/// Terms are kept in canonical (graded lexicographic) order without
/// duplicate exponent vectors; the constructor sorts and merges. Evaluation
/// sums terms sequentially in that order, so results are bit-reproducible.
/// Zero coefficients are retained: a fitted model keeps the terms it was
/// fitted with even if a coefficient happens to be exactly zero.
class CoupledPolynomial {
 public:
  CoupledPolynomial() = default;
  CoupledPolynomial(int input_dim, int max_degree,
                    std::vector<MonomialTerm> terms = {});

  int input_dim() const noexcept { return input_dim_; }
  int max_degree() const noexcept { return max_degree_; }
  std::span<const MonomialTerm> terms() const noexcept { return terms_; }
  std::size_t size() const noexcept { return terms_.size(); }

  /// Coefficient of the given exponent vector, 0 when absent.
  double coefficient_of(const Exponents& exponents) const;

  double eval(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  /// Exactly symmetric: the upper triangle is computed and mirrored.
  Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd>& z) const;

  /// Evaluate every row of Z (N x m).
  Eigen::VectorXd eval_rows(const Eigen::MatrixXd& Z) const;

  CoupledPolynomial scaled(double factor) const;

  friend CoupledPolynomial operator+(const CoupledPolynomial& a,
                                     const CoupledPolynomial& b);
  friend CoupledPolynomial operator*(double a, const CoupledPolynomial& p) {
    return p.scaled(a);
  }
  friend bool operator==(const CoupledPolynomial& a,
                         const CoupledPolynomial& b);

  /// Product of two polynomials; the result's max_degree is the sum.
  friend CoupledPolynomial multiply(const CoupledPolynomial& a,
                                    const CoupledPolynomial& b);

 private:
  void check_dim(Eigen::Index n) const;
  void fill_powers(const Eigen::Ref<const Eigen::VectorXd>& z,
                   std::vector<double>& powers) const;

  int input_dim_ = 0;
  int max_degree_ = 0;
  std::vector<MonomialTerm> terms_;
};

/// Evaluates the basis functions (or their derivatives) of a branch
/// nonlinearity at x. The decoupled model only touches a branch through this
/// interface, so a non-polynomial basis can be dropped in later as long as it
/// is linear in its coefficients and twice differentiable.
template <class Basis>
concept BranchBasis = requires(const Basis& b, double x, int order,
                               std::span<double> out) {
  { b.size() } -> std::convertible_to<int>;
  b.evaluate(x, order, out);
};

/// Monomial basis {x, x^2, ..., x^M}; no constant term.
class MonomialBasis {
 public:
  explicit MonomialBasis(int degree);

  int size() const noexcept { return degree_; }
  /// out[j-1] = d^order/dx^order x^j for j = 1..M.
  void evaluate(double x, int order, std::span<double> out) const;

 private:
  int degree_;
};

static_assert(BranchBasis<MonomialBasis>);

/// g(x) = c_1 x + c_2 x^2 + ... + c_M x^M. The constant lives in the
/// decoupled model's offset, never here.
class UnivariatePoly {
 public:
  UnivariatePoly() = default;
  explicit UnivariatePoly(std::vector<double> coeffs);

  int degree() const noexcept { return static_cast<int>(coeffs_.size()); }
  std::span<const double> coeffs() const noexcept { return coeffs_; }
  std::vector<double>& mutable_coeffs() noexcept { return coeffs_; }

  /// Horner evaluation of g, g' or g'' (derivative_order in {0, 1, 2}).
  double eval(double x, int derivative_order = 0) const;

  /// Arbitrary-order derivative; used for the third derivative in the
  /// structured CPD Jacobian.
  double derivative(double x, int order) const;

  /// Coefficients [2*1*c_2, 3*2*c_3, ..., M(M-1)c_M] of g'' in powers
  /// x^0 .. x^{M-2}. Empty when M < 2.
  std::vector<double> second_derivative_coeffs() const;

  friend bool operator==(const UnivariatePoly&, const UnivariatePoly&) = default;

 private:
  std::vector<double> coeffs_;
};

/// Evaluates the plain power series sum_k a_k x^k (k from 0) by Horner.
double horner(std::span<const double> a, double x) noexcept;

}  // namespace dnarx::poly
