#include <cmath>

#include "doctest.h"
#include "lsmc/errors.hpp"
#include "lsmc/lsm_engine.hpp"
#include "lsmc/parallel.hpp"

using namespace lsmc;

namespace {

const ProcessSpec kPoisson{ProcessKind::Poisson};
const TimeGrid kGrid3({0.0, 1.0, 2.0, 3.0});

}  // namespace

TEST_CASE("regress_step: targets in the span are recovered to O(1/sqrt N)") {
  const std::size_t N = 200000;
  const PathSet ps = simulate(kPoisson, TimeGrid({0.0, 1.0, 2.0}), N, 9);
  const BasisSpec s1 = basis_for(kPoisson, 2, 1.0), s2 = basis_for(kPoisson, 2, 2.0);
  std::vector<double> next(N);
  for (std::size_t i = 0; i < N; ++i) next[i] = 3.0 - 2.0 * psi(s2, 1, ps.state(i, 2));
  auto gram = std::make_shared<const GramMatrix>(gram_analytic(s1));
  const RegressionOutcome r = regress_step(ps, 1, next, s1, gram);
  CHECK(r.n == 1);
  CHECK(r.beta_hat(0) == doctest::Approx(3.0).epsilon(0.02));
  CHECK(r.beta_hat(1) == doctest::Approx(-2.0).epsilon(0.02));
  CHECK(std::fabs(r.beta_hat(2)) < 0.02);
  CHECK(r.gram_used == gram);
}

TEST_CASE("regress_step: K = 0 averages the targets exactly") {
  const PathSet ps = simulate(kPoisson, TimeGrid({0.0, 1.0, 2.0}), 1000, 9);
  const BasisSpec s = basis_for(kPoisson, 0, 1.0);
  std::vector<double> next(1000);
  double mean = 0;
  for (std::size_t i = 0; i < 1000; ++i) mean += (next[i] = ps.state(i, 2)) / 1000.0;
  const auto r = regress_step(ps, 1, next, s, std::make_shared<const GramMatrix>(gram_analytic(s)));
  CHECK(r.beta_hat(0) == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("regress_step: input errors") {
  const PathSet ps = simulate(kPoisson, TimeGrid({0.0, 1.0, 2.0}), 10, 9);
  const BasisSpec s = basis_for(kPoisson, 1, 1.0);
  auto gram = std::make_shared<const GramMatrix>(gram_analytic(s));
  std::vector<double> next(10, 1.0);
  next[3] = NAN;
  CHECK_THROWS_AS(regress_step(ps, 1, next, s, gram), InputError);
  CHECK_THROWS_AS(regress_step(ps, 1, std::vector<double>(9, 1.0), s, gram), InputError);
  CHECK_THROWS_AS(regress_step(ps, 1, std::vector<double>(10, 1.0), basis_for(kPoisson, 2, 1.0), gram),
                  InputError);
}

TEST_CASE("lsm_price: zero payoff prices to zero") {
  PayoffSpec zero{std::vector<Payoff>(4, Payoff::zero())};
  const PriceResult r = lsm_price(kPoisson, kGrid3, zero, 2, 2000, 1);
  CHECK(r.V0 == 0.0);
  CHECK(r.steps.size() == 2);
  CHECK(r.steps[0].n == 1);
  CHECK(r.steps[1].n == 2);
}

TEST_CASE("lsm_price: constant exercise value") {
  PayoffSpec c{std::vector<Payoff>(4, Payoff::constant(2.5))};
  // With the sample Gram a constant lies exactly in the span.
  PriceOptions o;
  o.gram = GramMode::Sample;
  const PriceResult exact = lsm_price(kPoisson, kGrid3, c, 1, 2000, 1, o);
  CHECK(exact.V0 == doctest::Approx(2.5).epsilon(1e-12));
  // The analytic Gram leaves noise in C_n, and max(h, C) only biases upward.
  const PriceResult r = lsm_price(kPoisson, kGrid3, c, 1, 2000, 1);
  CHECK(r.V0 >= 2.5);
  CHECK(r.V0 < 2.6);
}

TEST_CASE("lsm_price: a martingale payoff never exercised prices to E[psi]") {
  // h_m = psi_{m,1}, never exercised early: every C_n = psi_{n,1} and
  // C_0 = E[psi_{1,1}(S_1)] = 0.
  PayoffSpec p{{Payoff::never(), Payoff::never(), Payoff::never(), Payoff::basis_combination({0.0, 1.0})}};
  for (PathMode mode : {PathMode::Fresh, PathMode::Shared})
    for (GramMode gm : {GramMode::Analytic, GramMode::Sample}) {
      PriceOptions o;
      o.paths = mode;
      o.gram = gm;
      const PriceResult r = lsm_price(kPoisson, kGrid3, p, 2, 100000, 3, o);
      CHECK(std::fabs(r.C0) <= 5 * r.C0_stderr + 0.02);
      CHECK(r.steps[1].beta_hat(1) == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("lsm_price: deterministic across worker counts") {
  PayoffSpec p{{Payoff::zero(), Payoff::put(1.0), Payoff::put(1.5), Payoff::put(2.0)}};
  const int saved = thread_count();
  set_thread_count(1);
  const PriceResult a = lsm_price(kPoisson, kGrid3, p, 2, 30000, 5);
  set_thread_count(4);
  const PriceResult b = lsm_price(kPoisson, kGrid3, p, 2, 30000, 5);
  set_thread_count(saved);
  CHECK(a.V0 == b.V0);
  CHECK(a.steps[0].beta_hat == b.steps[0].beta_hat);
}

TEST_CASE("lsm_price: invalid specs") {
  PayoffSpec short_spec{std::vector<Payoff>(3, Payoff::zero())};
  CHECK_THROWS_AS(lsm_price(kPoisson, kGrid3, short_spec, 1, 100, 1), InvalidSpec);
  PayoffSpec ok{std::vector<Payoff>(4, Payoff::zero())};
  CHECK_THROWS_AS(lsm_price(kPoisson, kGrid3, ok, -1, 100, 1), InvalidSpec);
}

TEST_CASE("payoff evaluation") {
  const BasisSpec s = basis_for(kPoisson, 2, 2.0);
  CHECK(Payoff::put(3.0)(1.0, s) == 2.0);
  CHECK(Payoff::call(3.0)(1.0, s) == 0.0);
  CHECK(std::isinf(Payoff::never()(1.0, s)));
  CHECK(Payoff::basis_combination({1.0, 2.0})(0.5, s) == doctest::Approx(1.0 + 2.0 * (2.0 - 0.5)));
}

TEST_CASE("single-period error matrix") {
  const BasisSpec s1 = basis_for(kPoisson, 0, 1.0), s2 = basis_for(kPoisson, 0, 2.0);
  const MseReport zero = single_period_error_matrix(s1, s2, 500, 20, 1);
  CHECK(zero.sup_mse == 0.0);

  const BasisSpec a1 = basis_for(kPoisson, 2, 1.0), a2 = basis_for(kPoisson, 2, 2.0);
  const MseReport r = single_period_error_matrix(a1, a2, 5000, 100, 1);
  CHECK(r.error_matrix.rows() == 3);
  CHECK(r.replication_errors.size() == 100);
  CHECK(r.sup_mse > 0.0);
  CHECK(r.sup_mse <= r.bound_upper.to_double() + 3 * r.sup_mse_stderr);
  CHECK(direction_mse(r, r.sup_direction) == doctest::Approx(r.sup_mse).epsilon(1e-10));
  for (int k = 0; k <= 2; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
    e(k) = 1.0;
    CHECK(direction_mse(r, e) == doctest::Approx(r.diag_mse(k)).epsilon(1e-12));
    CHECK(direction_mse(r, e) <= r.sup_mse * (1 + 1e-12));
  }
  REQUIRE(r.regime.has_value());

  const MseReport one = single_period_error_matrix(a1, a2, 500, 1, 1);
  CHECK(one.no_stderr);
  CHECK(std::isnan(one.sup_mse_stderr));

  const int saved = thread_count();
  set_thread_count(1);
  const MseReport x = single_period_error_matrix(a1, a2, 3000, 30, 2);
  set_thread_count(3);
  const MseReport y = single_period_error_matrix(a1, a2, 3000, 30, 2);
  set_thread_count(saved);
  CHECK(x.error_matrix == y.error_matrix);
}
