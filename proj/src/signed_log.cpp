#include "lsmc/signed_log.hpp"

#include <algorithm>
#include <stdexcept>

namespace lsmc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

SignedLog::SignedLog(double value) {
  if (value == 0.0) return;
  sign_ = value > 0.0 ? 1 : -1;
  log_abs_ = std::log(std::fabs(value));
}

SignedLog SignedLog::from_log(int sign, double log_abs) {
  SignedLog r;
  if (sign == 0 || log_abs == kNegInf) return r;
  r.sign_ = sign > 0 ? 1 : -1;
  r.log_abs_ = log_abs;
  return r;
}

double SignedLog::log_abs() const noexcept { return sign_ == 0 ? kNegInf : log_abs_; }

double SignedLog::log10_abs() const noexcept {
  return sign_ == 0 ? kNegInf : log_abs_ / std::log(10.0);
}

double SignedLog::to_double() const noexcept {
  if (sign_ == 0) return 0.0;
  return sign_ * std::exp(log_abs_);
}

bool SignedLog::representable() const noexcept {
  return sign_ == 0 || std::fabs(log_abs_) < 700.0;
}

SignedLog SignedLog::operator-() const noexcept {
  SignedLog r = *this;
  r.sign_ = -r.sign_;
  return r;
}

SignedLog& SignedLog::operator*=(const SignedLog& rhs) noexcept {
  if (sign_ == 0 || rhs.sign_ == 0) {
    *this = SignedLog();
    return *this;
  }
  sign_ *= rhs.sign_;
  log_abs_ += rhs.log_abs_;
  return *this;
}

SignedLog& SignedLog::operator/=(const SignedLog& rhs) {
  if (rhs.sign_ == 0) throw std::domain_error("SignedLog: division by zero");
  if (sign_ == 0) return *this;
  sign_ *= rhs.sign_;
  log_abs_ -= rhs.log_abs_;
  return *this;
}

SignedLog& SignedLog::operator+=(const SignedLog& rhs) noexcept {
  if (rhs.sign_ == 0) return *this;
  if (sign_ == 0) {
    *this = rhs;
    return *this;
  }
  const double hi = std::max(log_abs_, rhs.log_abs_);
  const double lo = std::min(log_abs_, rhs.log_abs_);
  if (sign_ == rhs.sign_) {
    log_abs_ = hi + std::log1p(std::exp(lo - hi));
    return *this;
  }
  if (hi == lo) {
    *this = SignedLog();
    return *this;
  }
  sign_ = log_abs_ > rhs.log_abs_ ? sign_ : rhs.sign_;
  log_abs_ = hi + std::log1p(-std::exp(lo - hi));
  return *this;
}

SignedLog& SignedLog::operator-=(const SignedLog& rhs) noexcept { return *this += -rhs; }

SignedLog SignedLog::pow(int n) const noexcept {
  if (n == 0) return one();
  if (sign_ == 0) return SignedLog();
  return from_log((n % 2 == 0) ? 1 : sign_, log_abs_ * n);
}

void SignedLogSum::add(const SignedLog& term) {
  if (term.sign() > 0) pos_.push_back(term.log_abs());
  if (term.sign() < 0) neg_.push_back(term.log_abs());
}

double SignedLogSum::log_sum(const std::vector<double>& logs) {
  if (logs.empty()) return kNegInf;
  const double m = *std::max_element(logs.begin(), logs.end());
  // Sort ascending so small terms are accumulated first.
  std::vector<double> sorted(logs);
  std::sort(sorted.begin(), sorted.end());
  double acc = 0.0;
  for (double l : sorted) acc += std::exp(l - m);
  return m + std::log(acc);
}

SignedLog SignedLogSum::result() const {
  return SignedLog::from_log(1, log_sum(pos_)) - SignedLog::from_log(1, log_sum(neg_));
}

SignedLog SignedLogSum::largest_term() const {
  double m = kNegInf;
  for (double l : pos_) m = std::max(m, l);
  for (double l : neg_) m = std::max(m, l);
  return SignedLog::from_log(1, m);
}

double SignedLogSum::cancellation_log() const {
  const double scale = std::max(log_sum(pos_), log_sum(neg_));
  if (scale == kNegInf) return 0.0;
  return result().log_abs() - scale;
}

double log_gamma(double x) { return std::lgamma(x); }

double log_factorial(int k) {
  if (k < 0) throw std::domain_error("log_factorial: negative argument");
  return std::lgamma(static_cast<double>(k) + 1.0);
}

double log_pochhammer(double t, int k) {
  if (k == 0) return 0.0;
  if (t <= 0.0) throw std::domain_error("log_pochhammer: t must be positive");
  // Direct summation is more accurate than the lgamma difference for small k.
  if (k <= 64) {
    double acc = 0.0;
    for (int j = 0; j < k; ++j) acc += std::log(t + j);
    return acc;
  }
  return std::lgamma(t + k) - std::lgamma(t);
}

SignedLog pochhammer_signed(double t, int k) {
  SignedLog acc = SignedLog::one();
  for (int j = 0; j < k; ++j) acc *= SignedLog(t + j);
  return acc;
}

}  // namespace lsmc
