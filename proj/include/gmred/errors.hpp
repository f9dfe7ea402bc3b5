#pragma once

#include <stdexcept>
#include <string>

namespace gmred {

/// Bad caller input: dimension mismatch, out-of-range index, invalid parameter.
class ArgumentError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical precondition failed (non-PD matrix, broken geometry, ...).
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The ratio q(x)/p(x) is unbounded for a candidate pair, so its Pearson
/// chi-square integral diverges. The pair must be excluded from merging.
class UnboundedRatio : public NumericError {
public:
  using NumericError::NumericError;
};

/// Adaptive quadrature could not reach the requested tolerance.
class ConvergenceError : public NumericError {
public:
  ConvergenceError(const std::string& what, double best_estimate)
      : NumericError(what), best_estimate_(best_estimate) {}

  double best_estimate() const noexcept { return best_estimate_; }

private:
  double best_estimate_;
};

}  // namespace gmred
