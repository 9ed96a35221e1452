#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dnarx {

/// Base class for every error raised by the library. Errors carry an
/// optional pipeline stage tag so that a failure deep inside the decoupling
/// pipeline can be reported as e.g. "[hessian_cpd] ...".
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}

  const std::string& stage() const noexcept { return stage_; }
  void set_stage(std::string stage) { stage_ = std::move(stage); }

 private:
  std::string stage_;
};

/// Inconsistent sizes between arguments (vector lengths, matrix shapes).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files, bad configuration values, I/O failures.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Rank deficiency, non-convergence, NaN, or other numerical failure.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, double condition = 0.0)
      : Error(what), condition_(condition) {}

  /// Condition estimate of the offending system, 0 when not applicable.
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// Up-front memory check for the Hessian-Jacobian failed.
class BudgetError : public NumericError {
 public:
  BudgetError(const std::string& what, std::uint64_t elements, double bytes)
      : NumericError(what), elements_(elements), bytes_(bytes) {}

  std::uint64_t elements() const noexcept { return elements_; }
  double bytes() const noexcept { return bytes_; }

 private:
  std::uint64_t elements_;
  double bytes_;
};

/// A free-run simulation diverged.
class UnstableError : public Error {
 public:
  using Error::Error;
};

}  // namespace dnarx
