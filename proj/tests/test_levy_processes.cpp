#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "lsmc/errors.hpp"
#include "lsmc/levy_processes.hpp"
#include "lsmc/parallel.hpp"
#include "lsmc/rng.hpp"

using namespace lsmc;

namespace {

const ProcessSpec kAll[] = {ProcessSpec{ProcessKind::Poisson}, ProcessSpec{ProcessKind::Gamma},
                            ProcessSpec{ProcessKind::Pascal}, ProcessSpec{ProcessKind::Meixner},
                            ProcessSpec{ProcessKind::Brownian}};

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter streams are addressable and distinct") {
  CounterRng a(1, 2, 3), b(1, 2, 3), c(1, 2, 4), d(2, 2, 3);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform_open();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("time grid invariants") {
  CHECK_NOTHROW(TimeGrid({0.0, 1.0, 2.0}));
  CHECK_THROWS_AS(TimeGrid({0.0, 1.0}), InvalidSpec);
  CHECK_THROWS_AS(TimeGrid({0.5, 1.0, 2.0}), InvalidSpec);
  CHECK_THROWS_AS(TimeGrid({0.0, 2.0, 1.0}), InvalidSpec);
  CHECK_THROWS_AS(TimeGrid({0.0, 1.0, INFINITY}), InvalidSpec);
}

TEST_CASE("increment_cf examples") {
  const auto p = increment_cf(ProcessSpec{ProcessKind::Poisson}, 0.0, 1.0);
  CHECK(p.real() == doctest::Approx(1.0));
  CHECK(p.imag() == doctest::Approx(0.0));
  const auto g = increment_cf(ProcessSpec{ProcessKind::Gamma}, 1.0, 1.0);
  CHECK(g.real() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(g.imag() == doctest::Approx(0.5).epsilon(1e-14));
  ProcessSpec pascal{ProcessKind::Pascal};
  pascal.q = 0.5;
  CHECK(std::abs(increment_cf(pascal, 0.0, 3.0) - 1.0) < 1e-15);
}

TEST_CASE("increment_cf modulus is at most one") {
  for (const auto& spec : kAll)
    for (double u = -10; u <= 10; u += 0.25)
      for (double dt : {0.1, 1.0, 3.5}) CHECK(std::abs(increment_cf(spec, u, dt)) <= 1.0 + 1e-14);
}

TEST_CASE("parameter validation") {
  ProcessSpec bad{ProcessKind::Pascal};
  bad.q = 1.0;
  CHECK_THROWS_AS(increment_cf(bad, 1.0, 1.0), InvalidSpec);
  ProcessSpec badm{ProcessKind::Meixner};
  badm.zeta = std::numbers::pi;
  CHECK_THROWS_AS(increment_mean_var(badm, 1.0), InvalidSpec);
  CHECK_THROWS_AS(increment_cf(ProcessSpec{ProcessKind::Gamma}, 1.0, 0.0), InvalidSpec);
}

TEST_CASE("increment_mean_var matches numerical log-cf derivatives") {
  // Oracle: central differences of log cf at u = 0.
  for (const auto& spec : kAll)
    for (double dt : {0.5, 2.0}) {
      const double h = 1e-4;
      auto logcf = [&](double u) { return std::log(increment_cf(spec, u, dt)); };
      const std::complex<double> d1 = (logcf(h) - logcf(-h)) / (2 * h);
      const std::complex<double> d2 = (logcf(h) - 2.0 * logcf(0) + logcf(-h)) / (h * h);
      const MeanVariance mv = increment_mean_var(spec, dt);
      CHECK(mv.mean == doctest::Approx(d1.imag()).epsilon(1e-6));
      CHECK(mv.variance == doctest::Approx(-d2.real()).epsilon(1e-5));
    }
  ProcessSpec pascal{ProcessKind::Pascal};
  pascal.q = 0.5;
  CHECK(increment_mean_var(pascal, 1.0).mean == doctest::Approx(1.0));
  CHECK(increment_mean_var(pascal, 1.0).variance == doctest::Approx(2.0));
  CHECK(increment_mean_var(ProcessSpec{ProcessKind::Poisson}, 2.0).variance == doctest::Approx(2.0));
  CHECK(std::fabs(increment_mean_var(ProcessSpec{ProcessKind::Meixner}, 1.0).mean) < 1e-15);
}

TEST_CASE("empirical characteristic function within 5 standard errors") {
  // 10^6 draws per kind, five frequencies; componentwise z-scores.
  const std::size_t n = 1000000;
  for (const auto& spec : kAll) {
    CAPTURE(to_string(spec.kind));
    std::vector<double> draws(n);
    parallel_for(block_count(n), [&](std::size_t b) {
      const std::size_t end = std::min(n, (b + 1) * kPathBlock);
      for (std::size_t i = b * kPathBlock; i < end; ++i) {
        CounterRng rng(77, 5, static_cast<std::uint32_t>(i));
        draws[i] = sample_increment(spec, 1.0, rng);
      }
    });
    for (double u : {-2.0, -1.0, 0.5, 1.0, 2.0}) {
      CAPTURE(u);
      double re = 0, im = 0, re2 = 0, im2 = 0;
      for (double x : draws) {
        const double c = std::cos(u * x), s = std::sin(u * x);
        re += c, im += s, re2 += c * c, im2 += s * s;
      }
      re /= n, im /= n;
      const double se_re = std::sqrt((re2 / n - re * re) / n);
      const double se_im = std::sqrt((im2 / n - im * im) / n);
      const auto exact = increment_cf(spec, u, 1.0);
      CHECK(std::fabs(re - exact.real()) <= 5 * se_re + 1e-12);
      CHECK(std::fabs(im - exact.imag()) <= 5 * se_im + 1e-12);
    }
  }
}

TEST_CASE("sample means over 10^6 draws") {
  for (auto [kind, dt] : {std::pair{ProcessKind::Poisson, 1.0}, std::pair{ProcessKind::Gamma, 2.0}}) {
    const ProcessSpec spec{kind};
    const std::size_t n = 1000000;
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      CounterRng rng(3, 9, static_cast<std::uint32_t>(i));
      const double x = sample_increment(spec, dt, rng);
      s += x, s2 += x * x;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::fabs(mean - dt) <= 5 * se);
  }
}

TEST_CASE("simulate: monotone paths and lattice states") {
  const TimeGrid grid({0.0, 0.5, 1.0, 2.5});
  for (const auto& spec : kAll) {
    const PathSet ps = simulate(spec, grid, 20000, 11);
    REQUIRE(ps.size() == 20000);
    REQUIRE(ps.states().size() == 20000 * 3);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      CHECK(ps.state(i, 0) == 0.0);
      for (std::size_t n = 1; n <= 3; ++n) {
        const double x = ps.state(i, n), prev = ps.state(i, n - 1);
        if (spec.kind == ProcessKind::Poisson || spec.kind == ProcessKind::Pascal) {
          REQUIRE(x == std::floor(x));
          REQUIRE(x >= prev);
        } else if (spec.kind == ProcessKind::Gamma) {
          REQUIRE(x > prev);
        } else {
          REQUIRE(std::isfinite(x));
        }
      }
    }
  }
}

TEST_CASE("simulate: a single Poisson path is two nondecreasing integers") {
  const PathSet ps = simulate(ProcessSpec{ProcessKind::Poisson}, TimeGrid({0.0, 1.0, 2.0}), 1, 5);
  CHECK(ps.state(0, 1) >= 0.0);
  CHECK(ps.state(0, 2) >= ps.state(0, 1));
}

TEST_CASE("simulate: Gamma columnwise means") {
  const std::size_t n = 100000;
  const PathSet ps = simulate(ProcessSpec{ProcessKind::Gamma}, TimeGrid({0.0, 1.0, 2.0}), n, 21);
  for (std::size_t c = 1; c <= 2; ++c) {
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < n; ++i) s += ps.state(i, c), s2 += ps.state(i, c) * ps.state(i, c);
    const double mean = s / n;
    CHECK(std::fabs(mean - static_cast<double>(c)) <= 5 * std::sqrt((s2 / n - mean * mean) / n));
  }
}

TEST_CASE("simulate: deterministic for any worker count") {
  const TimeGrid grid({0.0, 1.0, 2.0});
  const int saved = thread_count();
  for (const auto& spec : kAll) {
    set_thread_count(1);
    const PathSet a = simulate(spec, grid, 10000, 42, 7);
    set_thread_count(4);
    const PathSet b = simulate(spec, grid, 10000, 42, 7);
    set_thread_count(3);
    const PathSet c = simulate(spec, grid, 10000, 42, 7);
    CHECK(a == b);
    CHECK(a == c);
    CHECK_FALSE(a == simulate(spec, grid, 10000, 43, 7));
  }
  set_thread_count(saved);
}

TEST_CASE("simulate: capacity error on absurd sizes") {
  CHECK_THROWS_AS(simulate(ProcessSpec{ProcessKind::Poisson}, TimeGrid({0.0, 1.0, 2.0}),
                           std::numeric_limits<std::size_t>::max() / 2, 1),
                  CapacityError);
}
