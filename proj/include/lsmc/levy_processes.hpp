#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsmc/rng.hpp"

namespace lsmc {

enum class ProcessKind { Poisson, Gamma, Pascal, Meixner, Brownian };

std::string to_string(ProcessKind kind);
/// Accepts the lower-case names "poisson", "gamma", "pascal", "meixner",
/// "brownian"; throws InvalidSpec otherwise.
ProcessKind parse_process_kind(std::string_view name);

/// Which Levy process, with its parameters. q is read only for Pascal
/// (0 < q < 1), zeta only for Meixner (0 < zeta < pi).
struct ProcessSpec {
  ProcessKind kind = ProcessKind::Poisson;
  double q = 0.5;
  double zeta = std::numbers::pi / 2;

  void validate() const;
  friend bool operator==(const ProcessSpec&, const ProcessSpec&) = default;
};

/// Exercise dates 0 = t_0 < t_1 < ... < t_m, m >= 2.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> times);

  const std::vector<double>& times() const noexcept { return times_; }
  /// Number of exercise dates after t_0 (the m of t_0..t_m).
  std::size_t m() const noexcept { return times_.size() - 1; }
  double operator[](std::size_t n) const { return times_.at(n); }
  /// Grid truncated to t_0..t_last (at least two points; not validated for m >= 2).
  TimeGrid prefix(std::size_t last) const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  struct Unchecked {};
  TimeGrid(std::vector<double> times, Unchecked) : times_(std::move(times)) {}
  std::vector<double> times_;
};

/// E[exp(i u (X_{s+dt} - X_s))].
std::complex<double> increment_cf(const ProcessSpec& spec, double u, double dt);

struct MeanVariance {
  double mean;
  double variance;
};

/// First two cumulants of an increment over dt.
MeanVariance increment_mean_var(const ProcessSpec& spec, double dt);

/// One increment over dt drawn from the stream.
double sample_increment(const ProcessSpec& spec, double dt, CounterRng& rng);

/// N simulated paths; states(i, n) is the state at t_n (t_0 state is 0).
class PathSet {
 public:
  PathSet(ProcessSpec spec, TimeGrid grid, std::size_t paths, std::uint64_t seed,
          std::uint64_t stream, std::vector<double> states);

  const ProcessSpec& spec() const noexcept { return spec_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return paths_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// State of path i at t_n, n in [0, m].
  double state(std::size_t i, std::size_t n) const {
    return n == 0 ? 0.0 : states_[i * grid_.m() + (n - 1)];
  }
  /// Row-major N x m block of states at t_1..t_m.
  std::span<const double> states() const noexcept { return states_; }

  friend bool operator==(const PathSet&, const PathSet&) = default;

 private:
  ProcessSpec spec_;
  TimeGrid grid_;
  std::size_t paths_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::vector<double> states_;
};

/// Simulates N paths. Path i draws from CounterRng(seed, stream, i), so the
/// result is bit-identical for any worker count.
PathSet simulate(const ProcessSpec& spec, const TimeGrid& grid, std::size_t paths,
                 std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace lsmc
