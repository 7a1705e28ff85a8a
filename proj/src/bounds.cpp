#include "lsmc/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <tuple>

#include "lsmc/connection_coeffs.hpp"
#include "lsmc/errors.hpp"
#include "lsmc/gram.hpp"
#include "lsmc/parallel.hpp"

namespace lsmc {

namespace {

void check_pair(const BasisSpec& spec1, const BasisSpec& spec2) {
  spec1.with_degree(0).validate();
  spec2.with_degree(0).validate();
  if (spec1.family != spec2.family || spec1.q != spec2.q || spec1.zeta != spec2.zeta)
    throw InputError("bounds: both times must share family and parameters");
  if (spec1.t > spec2.t) throw InputError("bounds: need t1 <= t2");
}

SignedLog fourth_moment_uncached(const BasisSpec& spec1, const BasisSpec& spec2, int j, int k) {
  const auto dj = connection_table(spec2, j);
  const auto dk = connection_table(spec1, k);
  SignedLogSum sum;
  for (int i = 0; i <= 2 * j; ++i) {
    if (dj->coeffs[i].is_zero()) continue;
    for (int s = 0; s <= 2 * k; ++s) {
      const SignedLog g = gram_entry_log(spec1, i, s);
      if (g.is_zero() || dk->coeffs[s].is_zero()) continue;
      sum.add(dj->coeffs[i] * dk->coeffs[s] * g);
    }
  }
  SignedLog result = sum.result();
  if (result.sign() < 0) {
    const double rel = result.log_abs() - sum.largest_term().log_abs();
    if (rel > std::log(1e-10))
      throw NumericalFailure("fourth_moment: negative result after cancellation");
    result = SignedLog::zero();
  }
  return result;
}

/// Max over nu = 1..m-1 and k <= K of E[psi_{nu k}^4], and of the double sum.
std::pair<SignedLog, SignedLog> fourth_maxima(int K, const ProcessSpec& process,
                                              const TimeGrid& grid) {
  SignedLog best_single;
  SignedLog best_double;
  for (std::size_t nu = 1; nu < grid.m(); ++nu) {
    const BasisSpec spec = basis_for(process, K, grid[nu]);
    SignedLogSum dsum;
    for (int j = 0; j <= K; ++j)
      for (int k = 0; k <= K; ++k) {
        const SignedLog f = fourth_moment(spec, spec, j, k);
        dsum.add(f);
        if (j == k && f.log_abs() > best_single.log_abs()) best_single = f;
      }
    const SignedLog d = dsum.result();
    if (d.log_abs() > best_double.log_abs()) best_double = d;
  }
  return {best_single, best_double};
}

}  // namespace

SignedLog fourth_moment(const BasisSpec& spec1, const BasisSpec& spec2, int j, int k) {
  check_pair(spec1, spec2);
  if (j < 0 || k < 0) throw InputError("fourth_moment: negative degree");
  using Key = std::tuple<int, double, double, double, double, int, int, bool>;
  static std::shared_mutex mutex;
  static std::map<Key, SignedLog> cache;
  const Key key{static_cast<int>(spec1.family), spec1.t, spec2.t, spec1.q, spec1.zeta, j, k,
                connection_fault()};
  {
    std::shared_lock lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const SignedLog value = fourth_moment_uncached(spec1, spec2, j, k);
  std::unique_lock lock(mutex);
  return cache.emplace(key, value).first->second;
}

SignedLog BoundValue::value() const {
  if (core.is_zero()) return core;
  return SignedLog::from_log(core.sign(), core.log_abs() - std::log(N));
}

double BoundValue::log10() const {
  const SignedLog v = value();
  if (v.sign() <= 0) return -std::numeric_limits<double>::infinity();
  return v.log10_abs();
}

BoundValue upper_bound(int K, double N, const BasisSpec& spec1, const BasisSpec& spec2) {
  check_pair(spec1, spec2);
  if (K < 0) throw InputError("upper_bound: negative K");
  if (!(N >= 1.0)) throw InputError("upper_bound: need N >= 1");
  SignedLogSum sum;
  for (int j = 0; j <= K; ++j)
    for (int k = 0; k <= K; ++k) sum.add(fourth_moment(spec1, spec2, j, k));
  const SignedLog inv_norm = gram_norm_sq_log(spec1.with_degree(K), true);
  return BoundValue{inv_norm * sum.result(), N};
}

BoundValue lower_bound(int K, double N, const BasisSpec& spec1, const BasisSpec& spec2) {
  check_pair(spec1, spec2);
  if (K < 0) throw InputError("lower_bound: negative K");
  if (!(N >= 1.0)) throw InputError("lower_bound: need N >= 1");
  SignedLogSum sum;
  for (int k = 0; k <= K; ++k) sum.add(fourth_moment(spec1, spec2, K, k));
  const SignedLog norm = gram_norm_sq_log(spec1.with_degree(K), false);
  return BoundValue{sum.result() / norm - SignedLog::one(), N};
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Converge: return "converge";
    case Verdict::Diverge: return "diverge";
    case Verdict::Indeterminate: return "indeterminate";
  }
  return "unknown";
}

std::pair<double, double> regime_exponents(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::Poisson: return {10.0, 4.0};
    case ProcessKind::Gamma: return {8.0, 8.0};
    case ProcessKind::Pascal: return {11.0, 7.0};
    case ProcessKind::Meixner: return {8.0, 8.0};
    case ProcessKind::Brownian: break;
  }
  throw InvalidSpec("no regime exponents for Brownian motion");
}

RegimeVerdict regime(int K, double N, ProcessKind kind, double epsilon) {
  if (!(epsilon > 0.0)) throw InputError("regime: epsilon must be positive");
  if (!(N >= 1.0)) throw InputError("regime: need N >= 1");
  const auto [u, v] = regime_exponents(kind);
  RegimeVerdict r{Verdict::Indeterminate, u, v, epsilon, SignedLog::one(), SignedLog::one()};
  if (K <= 1) return r;
  const double lk = std::log2(static_cast<double>(K));
  const double log2_conv = (u + epsilon) * K * lk;
  const double log2_div = (v - epsilon) * K * lk;
  r.threshold_converge = SignedLog::from_log(1, log2_conv * std::numbers::ln2);
  r.threshold_diverge = SignedLog::from_log(1, log2_div * std::numbers::ln2);
  const double log2_n = std::log2(N);
  if (log2_n >= log2_conv)
    r.verdict = Verdict::Converge;
  else if (log2_n <= log2_div)
    r.verdict = Verdict::Diverge;
  return r;
}

CriticalK critical_K_log(double log_N, double c) {
  if (!(c > 0.0)) throw InputError("critical_K: c must be positive");
  if (!(log_N >= std::log(3.0))) throw InputError("critical_K: need N >= 3");
  auto f = [&](double k) { return c * k * std::log(k) - log_N; };
  double lo = 1.0;
  double hi = 2.0;
  while (f(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return CriticalK{0.5 * (lo + hi), log_N / (c * std::log(log_N))};
}

CriticalK critical_K(double N, double c) {
  if (!(N >= 3.0)) throw InputError("critical_K: need N >= 3");
  return critical_K_log(std::log(N), c);
}

MultiPeriodCore multi_period_bound_core(int K, double N, int n, const ProcessSpec& process,
                                        const TimeGrid& grid) {
  const int m = static_cast<int>(grid.m());
  if (n < 1 || n >= m) throw InputError("multi_period_bound_core: need 1 <= n < m");
  if (K < 0) throw InputError("multi_period_bound_core: negative K");
  if (!(N >= 1.0)) throw InputError("multi_period_bound_core: need N >= 1");
  SignedLog inv_norm3;
  for (int nu = 1; nu < m; ++nu) {
    const SignedLog sq = gram_norm_sq_log(basis_for(process, K, grid[nu]), true);
    const SignedLog cubed = SignedLog::from_log(1, 1.5 * sq.log_abs());
    if (cubed.log_abs() > inv_norm3.log_abs()) inv_norm3 = cubed;
  }
  const auto [single, dbl] = fourth_maxima(K, process, grid);
  const int power = m - n + 1;
  MultiPeriodCore out;
  out.with_max_fourth = BoundValue{inv_norm3 * single.pow(power), N};
  out.with_double_sum = BoundValue{inv_norm3 * dbl.pow(power), N};
  return out;
}

SignedLog growth_constraint_rhs(int K, const ProcessSpec& process, const TimeGrid& grid) {
  double ratio = 0.0;
  for (std::size_t nu = 1; nu < grid.m(); ++nu) ratio = std::max(ratio, grid[nu + 1] / grid[nu]);
  const SignedLog factor = SignedLog::from_log(1, 2.0 * K * std::log(ratio));
  return factor * fourth_maxima(K, process, grid).first;
}

GrowthCheck check_growth_constraint(const std::vector<std::function<double(double)>>& payoffs,
                                    const PathSet& paths, int K) {
  const std::size_t m = paths.grid().m();
  if (payoffs.size() != m + 1) throw InputError("check_growth_constraint: need h_0..h_m");
  GrowthCheck out;
  out.rhs = growth_constraint_rhs(K, paths.spec(), paths.grid());
  const double rhs = out.rhs.to_double();
  const std::size_t N = paths.size();
  const std::size_t blocks = block_count(N);

  for (std::size_t n = 0; n <= m; ++n) {
    std::vector<double> s1(blocks), s2(blocks);
    parallel_for(blocks, [&](std::size_t b) {
      double a = 0.0, a2 = 0.0;
      const std::size_t end = std::min(N, (b + 1) * kPathBlock);
      for (std::size_t i = b * kPathBlock; i < end; ++i) {
        const double h = payoffs[n](paths.state(i, n));
        const double h4 = h * h * h * h;
        a += h4;
        a2 += h4 * h4;
      }
      s1[b] = a;
      s2[b] = a2;
    });
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
      sum += s1[b];
      sum2 += s2[b];
    }
    const double nn = static_cast<double>(N);
    const double mean = sum / nn;
    const double var = std::max(0.0, sum2 / nn - mean * mean);
    const double se = N > 1 ? std::sqrt(var / (nn - 1.0)) : std::numeric_limits<double>::infinity();
    out.lhs.push_back(mean);
    out.lhs_stderr.push_back(se);
    out.log_margin.push_back(mean > 0.0 ? out.rhs.log_abs() - std::log(mean)
                                        : std::numeric_limits<double>::infinity());
    if (mean > rhs) out.holds = false;
    if (se > 0.2 * std::fabs(rhs - mean)) out.indeterminate = true;
  }
  return out;
}

}  // namespace lsmc
