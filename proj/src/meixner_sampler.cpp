#include "lsmc/meixner_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <utility>

#include "lsmc/errors.hpp"

namespace lsmc {

double log_abs_gamma_complex(double a, double y) {
  std::complex<double> z(a, y);
  double shift = 0.0;
  while (z.real() < 12.0) {
    shift += std::log(std::abs(z));
    z += 1.0;
  }
  const std::complex<double> zi = 1.0 / z;
  const std::complex<double> zi2 = zi * zi;
  const std::complex<double> series =
      zi * (1.0 / 12 - zi2 * (1.0 / 360 - zi2 * (1.0 / 1260 - zi2 * (1.0 / 1680 - zi2 / 1188.0))));
  const std::complex<double> lg =
      (z - 0.5) * std::log(z) - z + 0.5 * std::log(2.0 * std::numbers::pi) + series;
  return lg.real() - shift;
}

namespace {

double log_density(double x, double dt, double zeta) {
  return (2.0 * zeta - std::numbers::pi) * x + 2.0 * log_abs_gamma_complex(dt, x);
}

}  // namespace

MeixnerIncrementTable::MeixnerIncrementTable(double dt, double zeta) : dt_(dt), zeta_(zeta) {
  if (!(dt > 0.0) || !(zeta > 0.0 && zeta < std::numbers::pi))
    throw InvalidSpec("Meixner table: need dt > 0 and 0 < zeta < pi");

  const double mean = -dt / std::tan(zeta);
  const double sd = std::sqrt(dt / (2.0 * std::sin(zeta) * std::sin(zeta)));

  // Locate the peak on a coarse scan, then extend each side until the
  // density has dropped by 1e-20.
  double peak = log_density(mean, dt, zeta);
  for (double x = mean - 3 * sd; x <= mean + 3 * sd; x += sd / 16)
    peak = std::max(peak, log_density(x, dt, zeta));
  constexpr double kTailDrop = 46.0;
  lo_ = mean - sd;
  while (log_density(lo_, dt, zeta) - peak > -kTailDrop) lo_ -= sd;
  hi_ = mean + sd;
  while (log_density(hi_, dt, zeta) - peak > -kTailDrop) hi_ += sd;

  double h = sd / 64;
  for (int refinement = 0; refinement < 8; ++refinement, h /= 2) {
    if (tabulate(h)) return;
  }
  throw SamplingError("Meixner table: CDF tabulation did not converge (mass error " +
                      std::to_string(mass_error_) + ")");
}

bool MeixnerIncrementTable::tabulate(double h) {
  const auto cells = static_cast<std::size_t>(std::ceil((hi_ - lo_) / h));
  h_ = (hi_ - lo_) / static_cast<double>(cells);
  x_.resize(cells + 1);
  std::vector<double> logf(cells + 1);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j <= cells; ++j) {
    x_[j] = lo_ + h_ * static_cast<double>(j);
    logf[j] = log_density(x_[j], dt_, zeta_);
    peak = std::max(peak, logf[j]);
  }
  density_.resize(cells + 1);
  for (std::size_t j = 0; j <= cells; ++j) density_[j] = std::exp(logf[j] - peak);

  cdf_.assign(cells + 1, 0.0);
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t j = 0; j < cells; ++j) {
    cdf_[j + 1] = cdf_[j] + 0.5 * h_ * (density_[j] + density_[j + 1]);
    m1 += 0.5 * h_ * (x_[j] * density_[j] + x_[j + 1] * density_[j + 1]);
    m2 += 0.5 * h_ * (x_[j] * x_[j] * density_[j] + x_[j + 1] * x_[j + 1] * density_[j + 1]);
  }
  const double mass = cdf_.back();
  // Closed-form normalizer: 2 pi Gamma(2 dt) / (2 sin zeta)^{2 dt}.
  const double log_norm = std::log(2.0 * std::numbers::pi) + std::lgamma(2.0 * dt_) -
                          2.0 * dt_ * std::log(2.0 * std::sin(zeta_));
  mass_error_ = std::fabs(std::log(mass) + peak - log_norm);

  const double mean = m1 / mass;
  const double var = m2 / mass - mean * mean;
  const double want_mean = -dt_ / std::tan(zeta_);
  const double want_var = dt_ / (2.0 * std::sin(zeta_) * std::sin(zeta_));
  const bool ok = mass_error_ < 1e-9 && std::fabs(mean - want_mean) < 1e-8 * std::sqrt(want_var) &&
                  std::fabs(var / want_var - 1.0) < 1e-8;
  if (ok) {
    for (double& c : cdf_) c /= mass;
    for (double& f : density_) f /= mass;
  }
  return ok;
}

double MeixnerIncrementTable::quantile(double u) const {
  const double target = std::clamp(u, 0.0, 1.0);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
  if (it == cdf_.begin()) return x_.front();
  if (it == cdf_.end()) return x_.back();
  const auto j = static_cast<std::size_t>(std::distance(cdf_.begin(), it) - 1);
  // Linear density on the cell: F(x_j + s) = cdf_j + f0 s + a s^2.
  const double f0 = density_[j];
  const double f1 = density_[j + 1];
  const double a = (f1 - f0) / (2.0 * h_);
  const double r = target - cdf_[j];
  const double denom = f0 + std::sqrt(std::max(0.0, f0 * f0 + 4.0 * a * r));
  const double s = denom > 0.0 ? 2.0 * r / denom : 0.0;
  return x_[j] + std::clamp(s, 0.0, h_);
}

std::shared_ptr<const MeixnerIncrementTable> meixner_table(double dt, double zeta) {
  static std::shared_mutex mutex;
  static std::map<std::pair<double, double>, std::shared_ptr<const MeixnerIncrementTable>> cache;
  const auto key = std::make_pair(dt, zeta);
  {
    std::shared_lock lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto table = std::make_shared<const MeixnerIncrementTable>(dt, zeta);
  std::unique_lock lock(mutex);
  auto [it, inserted] = cache.emplace(key, std::move(table));
  return it->second;
}

}  // namespace lsmc
