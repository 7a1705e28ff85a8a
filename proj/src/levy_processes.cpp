#include "lsmc/levy_processes.hpp"

#include <cmath>
#include <limits>
#include <new>
#include <random>

#include "lsmc/errors.hpp"
#include "lsmc/meixner_sampler.hpp"
#include "lsmc/parallel.hpp"

namespace lsmc {

std::string to_string(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::Poisson: return "poisson";
    case ProcessKind::Gamma: return "gamma";
    case ProcessKind::Pascal: return "pascal";
    case ProcessKind::Meixner: return "meixner";
    case ProcessKind::Brownian: return "brownian";
  }
  return "unknown";
}

ProcessKind parse_process_kind(std::string_view name) {
  if (name == "poisson") return ProcessKind::Poisson;
  if (name == "gamma") return ProcessKind::Gamma;
  if (name == "pascal") return ProcessKind::Pascal;
  if (name == "meixner") return ProcessKind::Meixner;
  if (name == "brownian") return ProcessKind::Brownian;
  throw InvalidSpec("unknown process '" + std::string(name) + "'");
}

void ProcessSpec::validate() const {
  if (kind == ProcessKind::Pascal && !(q > 0.0 && q < 1.0))
    throw InvalidSpec("Pascal process requires 0 < q < 1");
  if (kind == ProcessKind::Meixner && !(zeta > 0.0 && zeta < std::numbers::pi))
    throw InvalidSpec("Meixner process requires 0 < zeta < pi");
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  if (times_.size() < 3) throw InvalidSpec("time grid needs t_0..t_m with m >= 2");
  if (times_.front() != 0.0) throw InvalidSpec("time grid must start at t_0 = 0");
  for (std::size_t n = 1; n < times_.size(); ++n) {
    if (!std::isfinite(times_[n])) throw InvalidSpec("time grid entries must be finite");
    if (!(times_[n] > times_[n - 1])) throw InvalidSpec("time grid must be strictly increasing");
  }
}

TimeGrid TimeGrid::prefix(std::size_t last) const {
  if (last == 0 || last >= times_.size()) throw InvalidSpec("time grid prefix out of range");
  return TimeGrid(std::vector<double>(times_.begin(), times_.begin() + last + 1), Unchecked{});
}

std::complex<double> increment_cf(const ProcessSpec& spec, double u, double dt) {
  spec.validate();
  if (!(dt > 0.0)) throw InvalidSpec("increment_cf: dt must be positive");
  using C = std::complex<double>;
  const C iu(0.0, u);
  switch (spec.kind) {
    case ProcessKind::Poisson:
      return std::exp(dt * (std::exp(iu) - 1.0));
    case ProcessKind::Gamma:
      return std::exp(-dt * std::log(1.0 - iu));
    case ProcessKind::Pascal:
      return std::exp(dt * (std::log(1.0 - spec.q) - std::log(1.0 - spec.q * std::exp(iu))));
    case ProcessKind::Meixner: {
      const C arg(0.5 * u, 0.5 * std::numbers::pi - spec.zeta);
      return std::exp(2.0 * dt * (std::log(std::sin(spec.zeta)) - std::log(std::cosh(arg))));
    }
    case ProcessKind::Brownian:
      return std::exp(-0.5 * dt * u * u);
  }
  return 1.0;
}

MeanVariance increment_mean_var(const ProcessSpec& spec, double dt) {
  spec.validate();
  if (!(dt > 0.0)) throw InvalidSpec("increment_mean_var: dt must be positive");
  switch (spec.kind) {
    case ProcessKind::Poisson:
    case ProcessKind::Gamma:
      return {dt, dt};
    case ProcessKind::Pascal: {
      const double r = spec.q / (1.0 - spec.q);
      return {dt * r, dt * r / (1.0 - spec.q)};
    }
    case ProcessKind::Meixner: {
      const double s = std::sin(spec.zeta);
      return {-dt * std::cos(spec.zeta) / s, dt / (2.0 * s * s)};
    }
    case ProcessKind::Brownian:
      return {0.0, dt};
  }
  return {0.0, 0.0};
}

double sample_increment(const ProcessSpec& spec, double dt, CounterRng& rng) {
  switch (spec.kind) {
    case ProcessKind::Poisson: {
      std::poisson_distribution<long long> d(dt);
      return static_cast<double>(d(rng));
    }
    case ProcessKind::Gamma: {
      std::gamma_distribution<double> d(dt, 1.0);
      return d(rng);
    }
    case ProcessKind::Pascal: {
      // Gamma-Poisson mixture: exact negative binomial with real shape dt.
      std::gamma_distribution<double> mix(dt, spec.q / (1.0 - spec.q));
      const double lambda = mix(rng);
      if (!(lambda > 0.0)) return 0.0;
      std::poisson_distribution<long long> d(lambda);
      return static_cast<double>(d(rng));
    }
    case ProcessKind::Meixner:
      return meixner_table(dt, spec.zeta)->quantile(rng.uniform_open());
    case ProcessKind::Brownian: {
      std::normal_distribution<double> d(0.0, std::sqrt(dt));
      return d(rng);
    }
  }
  return 0.0;
}

PathSet::PathSet(ProcessSpec spec, TimeGrid grid, std::size_t paths, std::uint64_t seed,
                 std::uint64_t stream, std::vector<double> states)
    : spec_(spec),
      grid_(std::move(grid)),
      paths_(paths),
      seed_(seed),
      stream_(stream),
      states_(std::move(states)) {
  if (states_.size() != paths_ * grid_.m()) throw InputError("PathSet: state block has wrong size");
}

PathSet simulate(const ProcessSpec& spec, const TimeGrid& grid, std::size_t paths,
                 std::uint64_t seed, std::uint64_t stream) {
  spec.validate();
  if (paths == 0) throw InputError("simulate: need at least one path");
  if (paths > std::numeric_limits<std::uint32_t>::max())
    throw CapacityError("simulate: path index exceeds the 32-bit substream range");
  const std::size_t m = grid.m();
  if (paths > std::numeric_limits<std::size_t>::max() / sizeof(double) / m)
    throw CapacityError("simulate: N x m state block overflows");
  std::vector<double> states;
  try {
    states.resize(paths * m);
  } catch (const std::bad_alloc&) {
    throw CapacityError("simulate: cannot allocate " + std::to_string(paths) + " x " +
                        std::to_string(m) + " states");
  }
  if (spec.kind == ProcessKind::Meixner)  // build tables before fanning out
    for (std::size_t n = 1; n <= m; ++n) meixner_table(grid[n] - grid[n - 1], spec.zeta);

  parallel_for(block_count(paths), [&](std::size_t b) {
    const std::size_t end = std::min(paths, (b + 1) * kPathBlock);
    for (std::size_t i = b * kPathBlock; i < end; ++i) {
      CounterRng rng(seed, stream, static_cast<std::uint32_t>(i));
      double x = 0.0;
      for (std::size_t n = 1; n <= m; ++n) {
        x += sample_increment(spec, grid[n] - grid[n - 1], rng);
        states[i * m + (n - 1)] = x;
      }
    }
  });
  return PathSet(spec, grid, paths, seed, stream, std::move(states));
}

}  // namespace lsmc
