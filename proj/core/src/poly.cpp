#include "dnarx/poly.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dnarx/errors.hpp"

namespace dnarx::poly {

int MonomialTerm::degree() const noexcept {
  return std::accumulate(exponents.begin(), exponents.end(), 0);
}

bool graded_lex_less(const Exponents& a, const Exponents& b) noexcept {
  const int da = std::accumulate(a.begin(), a.end(), 0);
  const int db = std::accumulate(b.begin(), b.end(), 0);
  if (da != db) return da < db;
  return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

namespace {

void enumerate_degree(int dim, int remaining, std::size_t pos, Exponents& cur,
                      std::vector<Exponents>& out) {
  if (pos + 1 == static_cast<std::size_t>(dim)) {
    cur[pos] = remaining;
    out.push_back(cur);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur[pos] = e;
    enumerate_degree(dim, remaining - e, pos + 1, cur, out);
  }
  cur[pos] = 0;
}

}  // namespace

std::vector<Exponents> enumerate_monomials(int input_dim, int max_degree) {
  if (input_dim < 1 || max_degree < 0) {
    throw DimensionError("enumerate_monomials: need input_dim >= 1 and max_degree >= 0");
  }
  std::vector<Exponents> out;
  out.reserve(static_cast<std::size_t>(monomial_count(input_dim, max_degree)));
  Exponents cur(static_cast<std::size_t>(input_dim), 0);
  for (int d = 0; d <= max_degree; ++d) enumerate_degree(input_dim, d, 0, cur, out);
  return out;
}

std::uint64_t monomial_count(int input_dim, int max_degree) {
  if (input_dim < 0 || max_degree < 0) return 0;
  // binomial(m + d, d) computed incrementally; every partial product is an
  // exact binomial coefficient, so the division never truncates.
  std::uint64_t c = 1;
  for (int k = 1; k <= max_degree; ++k) {
    c = c * static_cast<std::uint64_t>(input_dim + k) / static_cast<std::uint64_t>(k);
  }
  return c;
}

CoupledPolynomial::CoupledPolynomial(int input_dim, int max_degree,
                                     std::vector<MonomialTerm> terms)
    : input_dim_(input_dim), max_degree_(max_degree) {
  if (input_dim < 1) throw DimensionError("polynomial input_dim must be >= 1");
  if (max_degree < 0) throw DimensionError("polynomial max_degree must be >= 0");
  for (const auto& t : terms) {
    if (t.exponents.size() != static_cast<std::size_t>(input_dim)) {
      throw DimensionError("monomial exponent vector has length " +
                           std::to_string(t.exponents.size()) + ", expected " +
                           std::to_string(input_dim));
    }
    if (std::any_of(t.exponents.begin(), t.exponents.end(), [](int e) { return e < 0; })) {
      throw DimensionError("monomial exponents must be non-negative");
    }
    if (t.degree() > max_degree) {
      throw DimensionError("monomial degree " + std::to_string(t.degree()) +
                           " exceeds max_degree " + std::to_string(max_degree));
    }
  }
  std::stable_sort(terms.begin(), terms.end(),
                   [](const MonomialTerm& a, const MonomialTerm& b) {
                     return graded_lex_less(a.exponents, b.exponents);
                   });
  for (auto& t : terms) {
    if (!terms_.empty() && terms_.back().exponents == t.exponents) {
      terms_.back().coefficient += t.coefficient;
    } else {
      terms_.push_back(std::move(t));
    }
  }
}

double CoupledPolynomial::coefficient_of(const Exponents& exponents) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), exponents,
                             [](const MonomialTerm& t, const Exponents& e) {
                               return graded_lex_less(t.exponents, e);
                             });
  if (it != terms_.end() && it->exponents == exponents) return it->coefficient;
  return 0.0;
}

void CoupledPolynomial::check_dim(Eigen::Index n) const {
  if (n != input_dim_) {
    throw DimensionError("polynomial expects " + std::to_string(input_dim_) +
                         " inputs, got " + std::to_string(n));
  }
}

void CoupledPolynomial::fill_powers(const Eigen::Ref<const Eigen::VectorXd>& z,
                                    std::vector<double>& powers) const {
  const std::size_t stride = static_cast<std::size_t>(max_degree_) + 1;
  powers.resize(static_cast<std::size_t>(input_dim_) * stride);
  for (int k = 0; k < input_dim_; ++k) {
    double* p = powers.data() + static_cast<std::size_t>(k) * stride;
    p[0] = 1.0;
    for (std::size_t e = 1; e < stride; ++e) p[e] = p[e - 1] * z[k];
  }
}

double CoupledPolynomial::eval(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  check_dim(z.size());
  std::vector<double> powers;
  fill_powers(z, powers);
  const std::size_t stride = static_cast<std::size_t>(max_degree_) + 1;
  double sum = 0.0;
  for (const auto& t : terms_) {
    double prod = t.coefficient;
    for (int k = 0; k < input_dim_; ++k) {
      const int e = t.exponents[static_cast<std::size_t>(k)];
      if (e != 0) prod *= powers[static_cast<std::size_t>(k) * stride + static_cast<std::size_t>(e)];
    }
    sum += prod;
  }
  return sum;
}

Eigen::VectorXd CoupledPolynomial::gradient(
    const Eigen::Ref<const Eigen::VectorXd>& z) const {
  check_dim(z.size());
  std::vector<double> powers;
  fill_powers(z, powers);
  const std::size_t stride = static_cast<std::size_t>(max_degree_) + 1;
  auto pw = [&](int k, int e) {
    return powers[static_cast<std::size_t>(k) * stride + static_cast<std::size_t>(e)];
  };
  Eigen::VectorXd g = Eigen::VectorXd::Zero(input_dim_);
  for (const auto& t : terms_) {
    const auto& ex = t.exponents;
    for (int d = 0; d < input_dim_; ++d) {
      const int ed = ex[static_cast<std::size_t>(d)];
      if (ed == 0) continue;
      double prod = t.coefficient * ed * pw(d, ed - 1);
      for (int k = 0; k < input_dim_; ++k) {
        const int e = ex[static_cast<std::size_t>(k)];
        if (k != d && e != 0) prod *= pw(k, e);
      }
      g[d] += prod;
    }
  }
  return g;
}

Eigen::MatrixXd CoupledPolynomial::hessian(
    const Eigen::Ref<const Eigen::VectorXd>& z) const {
  check_dim(z.size());
  std::vector<double> powers;
  fill_powers(z, powers);
  const std::size_t stride = static_cast<std::size_t>(max_degree_) + 1;
  auto pw = [&](int k, int e) {
    return powers[static_cast<std::size_t>(k) * stride + static_cast<std::size_t>(e)];
  };
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(input_dim_, input_dim_);
  for (const auto& t : terms_) {
    const auto& ex = t.exponents;
    if (t.degree() < 2) continue;
    for (int a = 0; a < input_dim_; ++a) {
      const int ea = ex[static_cast<std::size_t>(a)];
      if (ea == 0) continue;
      for (int b = a; b < input_dim_; ++b) {
        const int eb = ex[static_cast<std::size_t>(b)];
        double prod;
        if (a == b) {
          if (ea < 2) continue;
          prod = t.coefficient * ea * (ea - 1) * pw(a, ea - 2);
        } else {
          if (eb == 0) continue;
          prod = t.coefficient * ea * eb * pw(a, ea - 1) * pw(b, eb - 1);
        }
        for (int k = 0; k < input_dim_; ++k) {
          const int e = ex[static_cast<std::size_t>(k)];
          if (k != a && k != b && e != 0) prod *= pw(k, e);
        }
        H(a, b) += prod;
      }
    }
  }
  for (int a = 0; a < input_dim_; ++a) {
    for (int b = a + 1; b < input_dim_; ++b) H(b, a) = H(a, b);
  }
  return H;
}

Eigen::VectorXd CoupledPolynomial::eval_rows(const Eigen::MatrixXd& Z) const {
  check_dim(Z.cols());
  Eigen::VectorXd out(Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) out[i] = eval(Z.row(i).transpose());
  return out;
}

CoupledPolynomial CoupledPolynomial::scaled(double factor) const {
  CoupledPolynomial out = *this;
  for (auto& t : out.terms_) t.coefficient *= factor;
  return out;
}

CoupledPolynomial operator+(const CoupledPolynomial& a, const CoupledPolynomial& b) {
  if (a.input_dim_ != b.input_dim_) {
    throw DimensionError("cannot add polynomials of different input_dim");
  }
  std::vector<MonomialTerm> terms(a.terms_.begin(), a.terms_.end());
  terms.insert(terms.end(), b.terms_.begin(), b.terms_.end());
  return CoupledPolynomial(a.input_dim_, std::max(a.max_degree_, b.max_degree_),
                           std::move(terms));
}

bool operator==(const CoupledPolynomial& a, const CoupledPolynomial& b) {
  if (a.input_dim_ != b.input_dim_ || a.max_degree_ != b.max_degree_ ||
      a.terms_.size() != b.terms_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.terms_.size(); ++i) {
    if (a.terms_[i].exponents != b.terms_[i].exponents ||
        a.terms_[i].coefficient != b.terms_[i].coefficient) {
      return false;
    }
  }
  return true;
}

CoupledPolynomial multiply(const CoupledPolynomial& a, const CoupledPolynomial& b) {
  if (a.input_dim_ != b.input_dim_) {
    throw DimensionError("cannot multiply polynomials of different input_dim");
  }
  std::map<Exponents, double, GradedLexLess> acc;
  Exponents e(static_cast<std::size_t>(a.input_dim_));
  for (const auto& ta : a.terms_) {
    for (const auto& tb : b.terms_) {
      for (std::size_t k = 0; k < e.size(); ++k) e[k] = ta.exponents[k] + tb.exponents[k];
      acc[e] += ta.coefficient * tb.coefficient;
    }
  }
  std::vector<MonomialTerm> terms;
  terms.reserve(acc.size());
  for (auto& [ex, c] : acc) terms.push_back({ex, c});
  return CoupledPolynomial(a.input_dim_, a.max_degree_ + b.max_degree_, std::move(terms));
}

MonomialBasis::MonomialBasis(int degree) : degree_(degree) {
  if (degree < 1) throw DimensionError("branch degree must be >= 1");
}

void MonomialBasis::evaluate(double x, int order, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(degree_)) {
    throw DimensionError("basis output span has wrong length");
  }
  // d^order/dx^order x^j = j!/(j-order)! x^(j-order)
  double xp = 1.0;  // x^(j - order) for the first j with j >= order
  for (int j = 1; j <= degree_; ++j) {
    if (j < order) {
      out[static_cast<std::size_t>(j - 1)] = 0.0;
      continue;
    }
    double falling = 1.0;
    for (int q = 0; q < order; ++q) falling *= static_cast<double>(j - q);
    if (j > order) xp = (j - order == 1) ? x : xp * x;
    out[static_cast<std::size_t>(j - 1)] = falling * (j == order ? 1.0 : xp);
  }
}

UnivariatePoly::UnivariatePoly(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) throw DimensionError("univariate polynomial needs degree >= 1");
}

double horner(std::span<const double> a, double x) noexcept {
  double acc = 0.0;
  for (std::size_t i = a.size(); i-- > 0;) acc = acc * x + a[i];
  return acc;
}

double UnivariatePoly::derivative(double x, int order) const {
  if (order < 0) throw std::invalid_argument("derivative order must be >= 0");
  const int M = degree();
  if (order == 0) {
    double acc = 0.0;
    for (int j = M; j >= 1; --j) acc = acc * x + coeffs_[static_cast<std::size_t>(j - 1)];
    return acc * x;
  }
  if (order > M) return 0.0;
  // sum_{j>=order} j!/(j-order)! c_j x^(j-order), Horner over j.
  double acc = 0.0;
  for (int j = M; j >= order; --j) {
    double falling = 1.0;
    for (int q = 0; q < order; ++q) falling *= static_cast<double>(j - q);
    acc = acc * x + falling * coeffs_[static_cast<std::size_t>(j - 1)];
  }
  return acc;
}

double UnivariatePoly::eval(double x, int derivative_order) const {
  if (derivative_order < 0 || derivative_order > 2) {
    throw std::invalid_argument("eval: derivative_order must be 0, 1 or 2");
  }
  return derivative(x, derivative_order);
}

std::vector<double> UnivariatePoly::second_derivative_coeffs() const {
  std::vector<double> out;
  for (int j = 2; j <= degree(); ++j) {
    out.push_back(static_cast<double>(j) * (j - 1) * coeffs_[static_cast<std::size_t>(j - 1)]);
  }
  return out;
}

}  // namespace dnarx::poly
