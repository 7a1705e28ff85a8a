#include "lsmc/connection_coeffs.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <tuple>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "lsmc/errors.hpp"

namespace lsmc {

namespace {

using mp = boost::multiprecision::cpp_bin_float_50;

std::atomic<bool> g_fault{false};

/// log of D = (s-k)!^2 (s-i)! (2k+i-2s)!.
double log_denominator(int k, int i, int s) {
  return 2 * log_factorial(s - k) + log_factorial(s - i) + log_factorial(2 * k + i - 2 * s);
}

/// x^n as a SignedLog, with 0^0 = 1.
SignedLog power(double x, int n) {
  if (n == 0) return SignedLog::one();
  return SignedLog(x).pow(n);
}

ConnectionTable make_table(const BasisSpec& spec, int k) {
  if (k < 0) throw InputError("connection coefficients: negative degree");
  spec.at(spec.t).with_degree(0).validate();
  ConnectionTable table{spec.family, k, spec.t, spec.q, spec.zeta, {}, 0.0};
  table.coeffs.assign(static_cast<std::size_t>(2 * k + 1), SignedLog::zero());
  return table;
}

SignedLog hermite_coeff(int k, int i, double t) {
  // psi_k^2 = sum_r binom(k,r)^2 r! t^r psi_{2k-2r}
  if ((2 * k - i) % 2 != 0) return SignedLog::zero();
  const int r = (2 * k - i) / 2;
  const double log_binom = log_factorial(k) - log_factorial(r) - log_factorial(k - r);
  return SignedLog::from_log(1, 2 * log_binom + log_factorial(r) + r * std::log(t));
}

SignedLog analytic_coeff(const BasisSpec& spec, int k, int i) {
  const double t = spec.t;
  if (spec.family == Family::Hermite) return hermite_coeff(k, i, t);

  const int s_lo = std::max(i, k);
  const int s_hi = k + i / 2;
  const double cz = std::cos(spec.zeta);
  SignedLogSum sum;
  for (int s = s_lo; s <= s_hi; ++s) {
    const int e = 2 * k + i - 2 * s;
    SignedLog term = SignedLog::from_log(1, -log_denominator(k, i, s));
    switch (spec.family) {
      case Family::Charlier:
        term *= SignedLog::from_log(1, (s - i) * std::log(t));
        break;
      case Family::Laguerre:
        term *= SignedLog::from_log(1, e * std::log(2.0) + log_pochhammer(t, s));
        break;
      case Family::MeixnerPoly:
        term *= SignedLog::from_log(1, e * std::log1p(spec.q) + (s - 2 * k) * std::log(spec.q) +
                                           log_pochhammer(t, s));
        break;
      case Family::MeixnerPollaczek:
        term *= power(-2.0 * cz, e) * SignedLog::from_log(1, log_pochhammer(2 * t, s));
        break;
      case Family::Hermite:
        break;
    }
    sum.add(term);
  }
  SignedLog prefactor;
  const int sign_i = (i % 2 == 0) ? 1 : -1;
  switch (spec.family) {
    case Family::Charlier:
      prefactor = SignedLog::from_log(sign_i, 2 * log_factorial(k));
      break;
    case Family::Laguerre:
      prefactor = SignedLog::from_log(sign_i, log_factorial(i) - log_pochhammer(t, i));
      break;
    case Family::MeixnerPoly:
      prefactor = SignedLog::from_log(sign_i, 2 * log_factorial(k) - log_pochhammer(t, i));
      break;
    case Family::MeixnerPollaczek:
      prefactor = SignedLog::from_log(1, log_factorial(i) - log_pochhammer(2 * t, i));
      break;
    case Family::Hermite:
      break;
  }
  return prefactor * sum.result();
}

SignedLog literal_coeff(const BasisSpec& spec, int k, int i) {
  const double t = spec.t;
  if (spec.family == Family::Hermite) return hermite_coeff(k, i, t);

  const int s_lo = std::max(i, k);
  const int s_hi = k + i / 2;
  const double base = 2 * log_factorial(k) + log_factorial(i);
  const double cz = std::cos(spec.zeta);
  const double sz = std::sin(spec.zeta);
  SignedLogSum sum;
  for (int s = s_lo; s <= s_hi; ++s) {
    SignedLog term = SignedLog::from_log(1, -log_denominator(k, i, s));
    switch (spec.family) {
      case Family::Charlier:
        term *= SignedLog::from_log(1, s * std::log(t));
        break;
      case Family::Laguerre:
        term *= pochhammer_signed(t - 1.0, s) * SignedLog::from_log(1, -s * std::log(4.0));
        break;
      case Family::MeixnerPoly:
        term *= SignedLog::from_log(
            1, log_pochhammer(t, s) - 2 * s * std::log1p(spec.q) - s * std::log(spec.q));
        break;
      case Family::MeixnerPollaczek:
        // (-2 cot z)^{2k+i} (1 + tan^2 z)^s = (-2)^{2k+i} cos^{2k+i-2s} z / sin^{2k+i} z
        term *= power(cz, 2 * k + i - 2 * s) *
                SignedLog::from_log(1, log_pochhammer(t, s) - s * std::log(4.0));
        break;
      case Family::Hermite:
        break;
    }
    sum.add(term);
  }
  SignedLog prefactor;
  switch (spec.family) {
    case Family::Charlier:
      prefactor = SignedLog::from_log(1, (2 * k - i) * std::log(t) + base);
      break;
    case Family::Laguerre:
      prefactor = SignedLog::from_log(1, (2 * k + i) * std::log(2.0) + base);
      break;
    case Family::MeixnerPoly:
      prefactor = SignedLog::from_log(1, (2 * k + i) * std::log1p(spec.q) + base +
                                             2 * log_pochhammer(t, k) - log_pochhammer(t, i));
      break;
    case Family::MeixnerPollaczek:
      prefactor = SignedLog::from_log((i % 2 == 0) ? 1 : -1,
                                      (2 * k + i) * (std::log(2.0) - std::log(sz)) + base);
      break;
    case Family::Hermite:
      break;
  }
  return prefactor * sum.result();
}

bool discrete_family(Family f) { return f == Family::Charlier || f == Family::MeixnerPoly; }

std::vector<mp> oracle_nodes(Family family, int k, int attempt) {
  const int n = 2 * k + 1;
  std::vector<mp> x(static_cast<std::size_t>(n));
  if (discrete_family(family)) {
    for (int r = 0; r < n; ++r) x[r] = mp(r) + mp(attempt) / 2;
  } else {
    const mp pi = boost::math::constants::pi<mp>();
    const mp half = mp(k + 1) + mp(attempt) / 3;
    for (int r = 0; r < n; ++r)
      x[r] = half - half * cos(pi * (2 * r + 1) / (2 * n));
  }
  return x;
}

/// Gaussian elimination with partial pivoting; false if a pivot vanishes.
bool solve(std::vector<std::vector<mp>> a, std::vector<mp> b, std::vector<mp>& x) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (abs(a[r][c]) > abs(a[p][c])) p = r;
    if (abs(a[p][c]) < mp("1e-45")) return false;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const mp f = a[r][c] / a[c][c];
      for (std::size_t j = c; j < n; ++j) a[r][j] -= f * a[c][j];
      b[r] -= f * b[c];
    }
  }
  x.assign(n, mp(0));
  for (std::size_t r = n; r-- > 0;) {
    mp acc = b[r];
    for (std::size_t j = r + 1; j < n; ++j) acc -= a[r][j] * x[j];
    x[r] = acc / a[r][r];
  }
  return true;
}

SignedLog to_signed_log(const mp& v) {
  if (v == 0) return SignedLog::zero();
  return SignedLog::from_log(v < 0 ? -1 : 1, static_cast<double>(log(abs(v))));
}

}  // namespace

void set_connection_fault(bool enabled) { g_fault.store(enabled); }
bool connection_fault() { return g_fault.load(); }

ConnectionTable connection_analytic(const BasisSpec& spec, int k) {
  ConnectionTable table = make_table(spec, k);
  for (int i = 0; i <= 2 * k; ++i) table.coeffs[i] = analytic_coeff(spec, k, i);
  if (g_fault.load() && k >= 1) table.coeffs[2 * k - 2] = -table.coeffs[2 * k - 2];
  return table;
}

ConnectionTable connection_paper_literal(const BasisSpec& spec, int k) {
  ConnectionTable table = make_table(spec, k);
  for (int i = 0; i <= 2 * k; ++i) table.coeffs[i] = literal_coeff(spec, k, i);
  return table;
}

ConnectionTable connection_oracle(const BasisSpec& spec, int k) {
  ConnectionTable table = make_table(spec, k);
  if (k > 12) throw InputError("connection_oracle: k must be <= 12");
  const auto rec = make_recurrence<mp>(spec, mp(spec.zeta));
  const std::size_t n = static_cast<std::size_t>(2 * k + 1);

  for (int attempt = 0; attempt < 4; ++attempt) {
    const auto nodes = oracle_nodes(spec.family, k, attempt);
    std::vector<std::vector<mp>> v(n, std::vector<mp>(n));
    std::vector<mp> y(n);
    for (std::size_t r = 0; r < n; ++r) {
      rec.values(nodes[r], v[r]);
      y[r] = v[r][static_cast<std::size_t>(k)] * v[r][static_cast<std::size_t>(k)];
    }
    std::vector<mp> c;
    if (!solve(v, y, c)) continue;

    mp worst = 0;
    mp scale = 0;
    for (std::size_t r = 0; r < n; ++r) {
      mp acc = -y[r];
      for (std::size_t i = 0; i < n; ++i) acc += v[r][i] * c[i];
      worst = std::max(worst, mp(abs(acc)));
      scale = std::max(scale, mp(abs(y[r])));
    }
    table.oracle_residual = static_cast<double>(worst / std::max(scale, mp(1)));
    for (std::size_t i = 0; i < n; ++i) table.coeffs[i] = to_signed_log(c[i]);
    return table;
  }
  throw NumericalFailure("connection_oracle: singular node system after retries");
}

std::shared_ptr<const ConnectionTable> connection_table(const BasisSpec& spec, int k) {
  using Key = std::tuple<int, int, double, double, double, bool>;
  static std::shared_mutex mutex;
  static std::map<Key, std::shared_ptr<const ConnectionTable>> cache;
  const Key key{static_cast<int>(spec.family), k, spec.t, spec.q, spec.zeta, g_fault.load()};
  {
    std::shared_lock lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto table = std::make_shared<const ConnectionTable>(connection_analytic(spec, k));
  std::unique_lock lock(mutex);
  return cache.emplace(key, std::move(table)).first->second;
}

ExpandedSquare expand_square(const BasisSpec& spec, int k, double x) {
  const auto table = connection_table(spec, k);
  const BasisSpec wide = spec.with_degree(2 * k);
  std::vector<SignedLog> psi_vals(static_cast<std::size_t>(2 * k + 1));
  for (int i = 0; i <= 2 * k; ++i) psi_vals[i] = psi_log(wide, i, x);

  // Neumaier summation of the linear-space terms.
  double sum = 0.0;
  double comp = 0.0;
  double largest = 0.0;
  for (int i = 0; i <= 2 * k; ++i) {
    const SignedLog term = table->coeffs[i] * psi_vals[i];
    if (!term.representable() && !term.is_zero())
      throw RangeError("expand_square: term exceeds double range", term.log_abs());
    const double v = term.to_double();
    largest = std::max(largest, std::fabs(v));
    const double s = sum + v;
    comp += (std::fabs(sum) >= std::fabs(v)) ? (sum - s) + v : (v - s) + sum;
    sum = s;
  }
  ExpandedSquare out;
  out.value = sum + comp;
  out.largest_term = largest;
  out.cancellation = std::fabs(out.value) < 1e-8 * largest;
  return out;
}

}  // namespace lsmc
