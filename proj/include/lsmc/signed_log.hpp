#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace lsmc {

/// A real number stored as sign and natural-log magnitude.
///
/// Used for factorial-scale quantities (connection coefficients, Gram
/// entries of high degree, fourth-moment sums) whose magnitude leaves the
/// double range long before the algorithmic content gets interesting.
class SignedLog {
 public:
  /// Exact zero.
  constexpr SignedLog() = default;

  explicit SignedLog(double value);

  static SignedLog from_log(int sign, double log_abs);
  static SignedLog zero() { return SignedLog(); }
  static SignedLog one() { return from_log(1, 0.0); }

  int sign() const noexcept { return sign_; }
  bool is_zero() const noexcept { return sign_ == 0; }
  /// Natural log of |value|; -inf for zero.
  double log_abs() const noexcept;
  double log10_abs() const noexcept;
  /// Linear value; overflows to +-inf or underflows to 0 outside double range.
  double to_double() const noexcept;
  /// True when |log| < 700, i.e. the linear value is comfortably finite.
  bool representable() const noexcept;

  SignedLog operator-() const noexcept;
  SignedLog& operator*=(const SignedLog& rhs) noexcept;
  SignedLog& operator/=(const SignedLog& rhs);
  SignedLog& operator+=(const SignedLog& rhs) noexcept;
  SignedLog& operator-=(const SignedLog& rhs) noexcept;

  /// x^n for integer n >= 0.
  SignedLog pow(int n) const noexcept;

  friend SignedLog operator*(SignedLog a, const SignedLog& b) noexcept { return a *= b; }
  friend SignedLog operator/(SignedLog a, const SignedLog& b) { return a /= b; }
  friend SignedLog operator+(SignedLog a, const SignedLog& b) noexcept { return a += b; }
  friend SignedLog operator-(SignedLog a, const SignedLog& b) noexcept { return a -= b; }

 private:
  int sign_ = 0;
  double log_abs_ = 0.0;
};

/// Two-pass log-sum-exp accumulator: positive and negative terms are summed
/// separately in log space and combined once at the end.
class SignedLogSum {
 public:
  void add(const SignedLog& term);
  SignedLog result() const;
  /// Largest |term| seen, as a SignedLog magnitude (sign +1), zero if empty.
  SignedLog largest_term() const;
  /// log|result| - log(max positive/negative partial sum); very negative
  /// values mean the result was obtained through heavy cancellation.
  double cancellation_log() const;
  std::size_t size() const noexcept { return pos_.size() + neg_.size(); }

 private:
  static double log_sum(const std::vector<double>& logs);
  std::vector<double> pos_;
  std::vector<double> neg_;
};

/// log Gamma(x) for x > 0.
double log_gamma(double x);
/// log k!.
double log_factorial(int k);
/// log (t)_k for t > 0; the rising factorial t (t+1) ... (t+k-1).
double log_pochhammer(double t, int k);
/// (t)_k for any real t as a SignedLog (handles t <= 0 factor by factor).
SignedLog pochhammer_signed(double t, int k);

}  // namespace lsmc
