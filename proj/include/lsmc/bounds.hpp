#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lsmc/levy_processes.hpp"
#include "lsmc/meixner_basis.hpp"
#include "lsmc/signed_log.hpp"

namespace lsmc {

/// E[psi_{2j}(S_{t2})^2 psi_{1k}(S_{t1})^2] = sum_i sum_s d_ji(t2) d_ks(t1) E[psi_{1i} psi_{1s}].
/// spec1, spec2 share family and parameters with t1 <= t2; K is ignored.
/// NumericalFailure if cancellation drives the sum negative.
SignedLog fourth_moment(const BasisSpec& spec1, const BasisSpec& spec2, int j, int k);

/// A bound of the form core / N. The core does not depend on N, so values
/// at different N differ by exactly the 1/N factor.
struct BoundValue {
  SignedLog core;
  double N = 1.0;

  SignedLog value() const;
  /// Linear value; +-inf or 0 outside the double range.
  double to_double() const { return value().to_double(); }
  /// log10 of the value; -inf when the value is not positive.
  double log10() const;
};

/// (||Psi_1^{-1}||^2 / N) sum_{j,k <= K} E[psi_{2j}^2 psi_{1k}^2].
BoundValue upper_bound(int K, double N, const BasisSpec& spec1, const BasisSpec& spec2);
/// (1/N) (sum_{k <= K} E[psi_{2K}^2 psi_{1k}^2] / ||Psi_1||^2 - 1); may be negative.
BoundValue lower_bound(int K, double N, const BasisSpec& spec1, const BasisSpec& spec2);

enum class Verdict { Converge, Diverge, Indeterminate };
std::string to_string(Verdict v);

/// Growth exponents (u, v): Poisson (10,4), Gamma (8,8), Pascal (11,7),
/// Meixner (8,8). InvalidSpec for Brownian motion.
std::pair<double, double> regime_exponents(ProcessKind kind);

struct RegimeVerdict {
  Verdict verdict = Verdict::Indeterminate;
  double u = 0.0;
  double v = 0.0;
  double epsilon = 0.0;
  /// K^{(u+eps)K} and K^{(v-eps)K}.
  SignedLog threshold_converge;
  SignedLog threshold_diverge;
};

/// Converge if N >= K^{(u+eps)K}, Diverge if N <= K^{(v-eps)K}; compared
/// in log2. Always Indeterminate for K <= 1, where both thresholds are 1.
RegimeVerdict regime(int K, double N, ProcessKind kind, double epsilon);

struct CriticalK {
  /// Root of K^{cK} = N on K > 1.
  double root = 0.0;
  /// log N / (c log log N).
  double asymptotic = 0.0;
};

CriticalK critical_K(double N, double c);
/// Same with log N given directly, for N beyond double range.
CriticalK critical_K_log(double log_N, double c);

struct MultiPeriodCore {
  /// (1/N) max_nu ||Psi_nu^{-1}||^3 (max_{nu,k} E[psi_{nu k}^4])^{m-n+1}.
  BoundValue with_max_fourth;
  /// Same with max_nu sum_{j,k} E[psi_{nu j}^2 psi_{nu k}^2] in place of the max.
  BoundValue with_double_sum;
  /// The unquantified c^K factor is not part of either value.
  bool constant_excluded = true;
};

/// Computable part of the multi-period error bound at step n, 1 <= n < m,
/// with nu ranging over 1..m-1.
MultiPeriodCore multi_period_bound_core(int K, double N, int n, const ProcessSpec& process,
                                        const TimeGrid& grid);

/// Right-hand side of the payoff growth constraint:
/// max_nu (t_{nu+1}/t_nu)^{2K} max_{nu,k} E[psi_{nu k}^4], nu = 1..m-1.
SignedLog growth_constraint_rhs(int K, const ProcessSpec& process, const TimeGrid& grid);

struct GrowthCheck {
  bool holds = true;
  /// Some step had MC stderr above 20% of its gap to the right-hand side.
  bool indeterminate = false;
  SignedLog rhs;
  /// Monte Carlo E[h_n^4] and its standard error, n = 0..m.
  std::vector<double> lhs;
  std::vector<double> lhs_stderr;
  /// log(rhs) - log(E[h_n^4]); +inf when E[h_n^4] = 0.
  std::vector<double> log_margin;
};

/// Checks E[h_n(S_{t_n})^4] <= rhs for every n by Monte Carlo over paths.
GrowthCheck check_growth_constraint(const std::vector<std::function<double(double)>>& payoffs,
                                    const PathSet& paths, int K);

}  // namespace lsmc
