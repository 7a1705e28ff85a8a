#include <cmath>
#include <functional>

#include "doctest.h"
#include "lsmc/bounds.hpp"
#include "lsmc/errors.hpp"
#include "oracles.hpp"

using namespace lsmc;
using oracle::Mp;

namespace {

Mp poisson_pmf(int x, double t) { return exp(Mp(-t) + x * log(Mp(t)) - lgamma(Mp(x + 1))); }

Mp eval(const oracle::Poly& p, Mp x) {
  Mp v = 0, xp = 1;
  for (const auto& c : p) v += c * xp, xp *= x;
  return v;
}

/// E[psi_{2j}(N_{t2})^2 psi_{1k}(N_{t1})^2] by a Poisson double sum.
Mp poisson_fourth(double t1, double t2, int j, int k) {
  const auto p1 = oracle::basis_polys(BasisSpec{Family::Charlier, k, t1});
  const auto p2 = oracle::basis_polys(BasisSpec{Family::Charlier, j, t2});
  Mp s = 0;
  for (int a = 0; a < 90; ++a)
    for (int b = 0; b < 90; ++b) {
      const Mp v1 = eval(p1[k], a), v2 = eval(p2[j], a + b);
      s += poisson_pmf(a, t1) * poisson_pmf(b, t2 - t1) * v1 * v1 * v2 * v2;
    }
  return s;
}

/// ||Psi^{-1}||^2 and ||Psi||^2 of the Charlier Gram diag(t^k k!).
Mp charlier_norm_sq(double t, int K, bool inverse) {
  Mp s = 0, d = 1;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) d *= t * k;
    s += inverse ? 1 / (d * d) : d * d;
  }
  return s;
}

const BasisSpec kC1{Family::Charlier, 2, 1.0};
const BasisSpec kC2{Family::Charlier, 2, 2.0};

}  // namespace

TEST_CASE("fourth_moment: trivial case and Poisson double sums") {
  CHECK(fourth_moment(kC1, kC2, 0, 0).to_double() == doctest::Approx(1.0));
  for (int j = 0; j <= 3; ++j)
    for (int k = 0; k <= 3; ++k)
      CHECK(fourth_moment(kC1, kC2, j, k).to_double() ==
            doctest::Approx(poisson_fourth(1.0, 2.0, j, k).convert_to<double>()).epsilon(1e-12));
  CHECK_THROWS_AS(fourth_moment(kC2, kC1, 1, 1), InputError);
}

TEST_CASE("fourth_moment: Monte Carlo examples") {
  struct Case {
    ProcessKind kind;
    int j, k;
  };
  for (const Case c : {Case{ProcessKind::Poisson, 1, 1}, Case{ProcessKind::Gamma, 1, 2}}) {
    const ProcessSpec p{c.kind};
    const std::size_t n = 1000000;
    const PathSet ps = simulate(p, TimeGrid({0.0, 1.0, 2.0}), n, 17);
    const BasisSpec s1 = basis_for(p, 2, 1.0), s2 = basis_for(p, 2, 2.0);
    double sum = 0, sum2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = psi(s2, c.j, ps.state(i, 2)), b = psi(s1, c.k, ps.state(i, 1));
      const double y = a * a * b * b;
      sum += y, sum2 += y * y;
    }
    const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::fabs(mean - fourth_moment(s1, s2, c.j, c.k).to_double()) <= 5 * se);
  }
}

TEST_CASE("upper and lower bounds") {
  for (double N : {1.0, 100.0, 1e4}) {
    CHECK(upper_bound(0, N, kC1, kC2).to_double() == doctest::Approx(1.0 / N).epsilon(1e-12));
    CHECK(lower_bound(0, N, kC1, kC2).to_double() == doctest::Approx(0.0).scale(1.0 / N));
  }
  // Extended-precision recomputation at K = 2 (upper) and K = 1 (lower).
  Mp sum = 0;
  for (int j = 0; j <= 2; ++j)
    for (int k = 0; k <= 2; ++k) sum += poisson_fourth(1.0, 2.0, j, k);
  const Mp up = charlier_norm_sq(1.0, 2, true) * sum / 1e4;
  CHECK(upper_bound(2, 1e4, kC1, kC2).to_double() ==
        doctest::Approx(up.convert_to<double>()).epsilon(1e-12));
  Mp s1 = 0;
  for (int k = 0; k <= 1; ++k) s1 += poisson_fourth(1.0, 2.0, 1, k);
  const Mp lo = (s1 / charlier_norm_sq(1.0, 1, false) - 1) / 1e4;
  CHECK(lower_bound(1, 1e4, kC1, kC2).to_double() ==
        doctest::Approx(lo.convert_to<double>()).epsilon(1e-12));
}

TEST_CASE("bound cores are independent of N") {
  const BoundValue a = upper_bound(3, 1e3, kC1, kC2);
  const BoundValue b = upper_bound(3, 1e6, kC1, kC2);
  CHECK(a.core.log_abs() == b.core.log_abs());
  CHECK(a.to_double() / b.to_double() == doctest::Approx(1e3));
  BoundValue neg{SignedLog(-2.0), 10.0};
  CHECK(std::isinf(neg.log10()));
}

TEST_CASE("regime exponents and examples") {
  CHECK(regime_exponents(ProcessKind::Poisson) == std::pair{10.0, 4.0});
  CHECK(regime_exponents(ProcessKind::Gamma) == std::pair{8.0, 8.0});
  CHECK(regime_exponents(ProcessKind::Pascal) == std::pair{11.0, 7.0});
  CHECK(regime_exponents(ProcessKind::Meixner) == std::pair{8.0, 8.0});
  CHECK_THROWS_AS(regime_exponents(ProcessKind::Brownian), InvalidSpec);

  const RegimeVerdict a = regime(2, std::ldexp(1.0, 24), ProcessKind::Poisson, 2.0);
  CHECK(a.verdict == Verdict::Converge);
  CHECK(a.threshold_converge.log_abs() == doctest::Approx(24 * std::log(2.0)));
  CHECK(regime(2, std::ldexp(1.0, 24) * (1 - 1e-12), ProcessKind::Poisson, 2.0).verdict !=
        Verdict::Converge);
  CHECK(regime(4, 1e6, ProcessKind::Poisson, 1.0).verdict == Verdict::Diverge);
  CHECK(regime(3, 1e6, ProcessKind::Poisson, 1.0).verdict == Verdict::Indeterminate);
  CHECK(regime(1, 1e300, ProcessKind::Gamma, 0.5).verdict == Verdict::Indeterminate);
  CHECK(regime(0, 10, ProcessKind::Gamma, 0.5).verdict == Verdict::Indeterminate);
}

TEST_CASE("regime verdicts are monotone in N") {
  for (ProcessKind kind :
       {ProcessKind::Poisson, ProcessKind::Gamma, ProcessKind::Pascal, ProcessKind::Meixner})
    for (int K = 2; K <= 6; ++K) {
      int last = -1;  // Diverge = 0, Indeterminate = 1, Converge = 2
      for (double lg = 0; lg < 300; lg += 0.5) {
        const Verdict v = regime(K, std::pow(10.0, lg), kind, 0.5).verdict;
        const int rank = v == Verdict::Diverge ? 0 : v == Verdict::Indeterminate ? 1 : 2;
        CHECK(rank >= last);
        last = rank;
      }
    }
}

TEST_CASE("critical_K") {
  CHECK(critical_K(std::ldexp(1.0, 20), 10).root == doctest::Approx(2.0).epsilon(1e-12));
  const double k = critical_K(1e6, 10).root;
  CHECK(k == doctest::Approx(2.0).epsilon(0.1));
  CHECK(std::pow(k, 10 * k) == doctest::Approx(1e6).epsilon(1e-9));
  // log N / (c log log N) approaches the root slowly; at c = 10 the ratio is
  // still near 0.5 for N = 10^300 but improves steadily.
  double prev = 0.0;
  for (double lg : {50.0, 100.0, 300.0, 3000.0}) {
    const CriticalK ck = critical_K_log(lg * std::log(10.0), 10);
    const double ratio = ck.asymptotic / ck.root;
    CHECK(ratio > prev);
    prev = ratio;
  }
  const CriticalK small_c = critical_K_log(300 * std::log(10.0), 0.1);
  CHECK(small_c.asymptotic / small_c.root == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("multi-period bound core") {
  const ProcessSpec p{ProcessKind::Poisson};
  const TimeGrid grid({0.0, 1.0, 2.0, 3.0});
  const MultiPeriodCore z = multi_period_bound_core(0, 250, 1, p, grid);
  CHECK(z.with_max_fourth.to_double() == doctest::Approx(1.0 / 250));
  CHECK(z.constant_excluded);

  // K = 2, m = 3, n = 1: (1/N) max_nu ||Psi_nu^{-1}||^3 (max E[psi^4])^3.
  Mp inv3 = 0, f4 = 0;
  for (double nu : {1.0, 2.0}) {
    inv3 = std::max(inv3, Mp(pow(charlier_norm_sq(nu, 2, true), Mp(1.5))));
    const auto polys = oracle::basis_polys(BasisSpec{Family::Charlier, 2, nu});
    for (int k = 0; k <= 2; ++k) {
      Mp e = 0;
      for (int x = 0; x < 90; ++x) e += poisson_pmf(x, nu) * pow(eval(polys[k], x), 4);
      f4 = std::max(f4, e);
    }
  }
  const Mp want = inv3 * pow(f4, 3) / 1e4;
  CHECK(multi_period_bound_core(2, 1e4, 1, p, grid).with_max_fourth.to_double() ==
        doctest::Approx(want.convert_to<double>()).epsilon(1e-10));
  CHECK_THROWS_AS(multi_period_bound_core(2, 1e4, 3, p, grid), InputError);
}

TEST_CASE("growth constraint") {
  const ProcessSpec p{ProcessKind::Poisson};
  const TimeGrid grid({0.0, 1.0, 2.0, 3.0});
  const PathSet ps = simulate(p, grid, 20000, 4);
  const std::vector<std::function<double(double)>> zero(4, [](double) { return 0.0; });
  const GrowthCheck a = check_growth_constraint(zero, ps, 2);
  CHECK(a.holds);
  for (double m : a.log_margin) CHECK(std::isinf(m));
  const std::vector<std::function<double(double)>> one(4, [](double) { return 1.0; });
  CHECK(check_growth_constraint(one, ps, 0).holds);
  CHECK(check_growth_constraint(one, ps, 3).holds);
  CHECK(growth_constraint_rhs(0, p, grid).to_double() == doctest::Approx(1.0));

  const BasisSpec top{Family::Charlier, 2, 2.0};
  std::vector<std::function<double(double)>> h(4, [](double) { return 0.0; });
  h[2] = [top](double x) { return psi(top, 2, x); };
  const GrowthCheck c = check_growth_constraint(h, ps, 2);
  CHECK(std::isfinite(c.log_margin[2]));
  CHECK(c.holds == (c.log_margin[2] >= 0.0));
}
