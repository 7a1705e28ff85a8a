#pragma once

#include <memory>
#include <vector>

namespace lsmc {

/// Re log Gamma(a + i y) for a > 0.
double log_abs_gamma_complex(double a, double y);

/// Inverse-CDF table for a Meixner increment over dt.
///
/// The density is proportional to exp((2 zeta - pi) x) |Gamma(dt + i x)|^2.
/// It is tabulated on a uniform grid wide enough that the tails fall below
/// 1e-20 of the peak, and the step is halved until total mass, mean and
/// variance agree with their closed forms. Between nodes the density is
/// linear, so the CDF is piecewise quadratic and inverted exactly.
class MeixnerIncrementTable {
 public:
  MeixnerIncrementTable(double dt, double zeta);

  double dt() const noexcept { return dt_; }
  double zeta() const noexcept { return zeta_; }
  /// Inverse CDF at u in (0, 1).
  double quantile(double u) const;

  std::size_t nodes() const noexcept { return x_.size(); }
  double step() const noexcept { return h_; }
  /// |tabulated mass / closed-form mass - 1| at the accepted step.
  double mass_error() const noexcept { return mass_error_; }

 private:
  bool tabulate(double h);

  double dt_;
  double zeta_;
  double lo_ = 0.0;
  double hi_ = 0.0;
  double h_ = 0.0;
  double mass_error_ = 0.0;
  std::vector<double> x_;
  std::vector<double> density_;
  std::vector<double> cdf_;
};

/// Shared table for (dt, zeta); built once, then read concurrently.
std::shared_ptr<const MeixnerIncrementTable> meixner_table(double dt, double zeta);

}  // namespace lsmc
