#pragma once

#include <stdexcept>
#include <string>

namespace lsmc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Process or basis parameters outside their admissible range.
class InvalidSpec : public Error {
 public:
  using Error::Error;
};

/// Bad caller input (non-finite regression targets, mismatched sizes, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Requested path-set size cannot be allocated.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Sampler table could not be built to the required accuracy.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Polynomial value outside double range; carries the natural-log magnitude.
class RangeError : public Error {
 public:
  RangeError(const std::string& what, double log_magnitude)
      : Error(what), log_magnitude_(log_magnitude) {}
  double log_magnitude() const noexcept { return log_magnitude_; }

 private:
  double log_magnitude_;
};

/// Quadrature or iterative scheme failed to reach its tolerance.
class PrecisionError : public Error {
 public:
  PrecisionError(const std::string& what, double achieved)
      : Error(what), achieved_(achieved) {}
  double achieved_tolerance() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Matrix is not symmetric positive definite.
class DecompositionError : public Error {
 public:
  using Error::Error;
};

/// A computed quantity violates a mathematical guarantee (e.g. a negative
/// fourth moment after cancellation).
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace lsmc
