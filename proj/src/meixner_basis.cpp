#include "lsmc/meixner_basis.hpp"

#include <cmath>

#include "lsmc/errors.hpp"

namespace lsmc {

namespace {

constexpr double kOverflow = 1e300;

/// Log-space rerun of the recurrence; used once the double pass overflows.
SignedLog psi_log_recurrence(const BasisSpec& spec, int k, double x) {
  const auto rec = make_recurrence(spec);
  if (k == 0) return SignedLog::one();
  SignedLog prev = SignedLog::one();
  SignedLog cur(rec.a(0, x));
  for (int n = 1; n < k; ++n) {
    SignedLog next = SignedLog(rec.a(n, x)) * cur - SignedLog(rec.c(n)) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Factor s_k with Q_k = psi_k / s_k, where Q_k is the standard polynomial.
double standard_scale(Family family, int k, double t) {
  switch (family) {
    case Family::Charlier: return std::pow(t, k);
    case Family::MeixnerPoly: return pochhammer(t, k);
    default: return 1.0;
  }
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::Charlier: return "charlier";
    case Family::Laguerre: return "laguerre";
    case Family::MeixnerPoly: return "meixner";
    case Family::MeixnerPollaczek: return "meixner-pollaczek";
    case Family::Hermite: return "hermite";
  }
  return "unknown";
}

Family family_for(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::Poisson: return Family::Charlier;
    case ProcessKind::Gamma: return Family::Laguerre;
    case ProcessKind::Pascal: return Family::MeixnerPoly;
    case ProcessKind::Meixner: return Family::MeixnerPollaczek;
    case ProcessKind::Brownian: return Family::Hermite;
  }
  return Family::Charlier;
}

ProcessKind process_for(Family family) {
  switch (family) {
    case Family::Charlier: return ProcessKind::Poisson;
    case Family::Laguerre: return ProcessKind::Gamma;
    case Family::MeixnerPoly: return ProcessKind::Pascal;
    case Family::MeixnerPollaczek: return ProcessKind::Meixner;
    case Family::Hermite: return ProcessKind::Brownian;
  }
  return ProcessKind::Poisson;
}

void BasisSpec::validate() const {
  if (K < 0) throw InvalidSpec("basis degree K must be nonnegative");
  if (!(t > 0.0) || !std::isfinite(t)) throw InvalidSpec("basis time t must be positive");
  if (family == Family::MeixnerPoly && !(q > 0.0 && q < 1.0))
    throw InvalidSpec("Meixner polynomials require 0 < q < 1");
  if (family == Family::MeixnerPollaczek && !(zeta > 0.0 && zeta < std::numbers::pi))
    throw InvalidSpec("Meixner-Pollaczek polynomials require 0 < zeta < pi");
}

BasisSpec BasisSpec::at(double time) const {
  BasisSpec r = *this;
  r.t = time;
  return r;
}

BasisSpec BasisSpec::with_degree(int degree) const {
  BasisSpec r = *this;
  r.K = degree;
  return r;
}

BasisSpec basis_for(const ProcessSpec& process, int K, double t) {
  process.validate();
  BasisSpec spec{family_for(process.kind), K, t, process.q, process.zeta};
  spec.validate();
  return spec;
}

ProcessSpec process_spec_for(const BasisSpec& basis) {
  return ProcessSpec{process_for(basis.family), basis.q, basis.zeta};
}

double pochhammer(double t, int k) {
  double r = 1.0;
  for (int j = 0; j < k; ++j) r *= t + j;
  return r;
}

void psi_vector(const BasisSpec& spec, double x, std::span<double> out) {
  make_recurrence(spec).values(x, out);
  for (double v : out) {
    if (!std::isfinite(v) || std::fabs(v) > kOverflow) {
      const int k = static_cast<int>(out.size()) - 1;
      throw RangeError("basis value exceeds double range", psi_log_recurrence(spec, k, x).log_abs());
    }
  }
}

std::vector<double> psi_vector(const BasisSpec& spec, double x) {
  std::vector<double> out(static_cast<std::size_t>(spec.K) + 1);
  psi_vector(spec, x, out);
  return out;
}

double psi(const BasisSpec& spec, int k, double x) {
  if (k < 0 || k > spec.K) throw InputError("psi: degree outside 0..K");
  std::vector<double> v(static_cast<std::size_t>(k) + 1);
  psi_vector(spec, x, v);
  return v.back();
}

SignedLog psi_log(const BasisSpec& spec, int k, double x) {
  if (k < 0) throw InputError("psi_log: negative degree");
  std::vector<double> v(static_cast<std::size_t>(k) + 1);
  make_recurrence(spec).values(x, v);
  bool finite = true;
  for (double e : v) finite = finite && std::isfinite(e) && std::fabs(e) <= kOverflow;
  return finite ? SignedLog(v.back()) : psi_log_recurrence(spec, k, x);
}

double eval_poly(Family family, int k, double x, double t, double q, double zeta) {
  if (k < 0) throw InputError("eval_poly: negative degree");
  const BasisSpec spec{family, k, t, q, zeta};
  const SignedLog value = psi_log(spec, k, x) / SignedLog(standard_scale(family, k, t));
  if (!value.representable())
    throw RangeError("polynomial value exceeds double range", value.log_abs());
  return value.to_double();
}

double martingale_factor(Family family, int k, double s, double t) {
  if (!(s > 0.0) || s > t) throw InputError("martingale_factor: need 0 < s <= t");
  switch (family) {
    case Family::Charlier: return std::pow(s / t, k);
    case Family::MeixnerPoly: return std::exp(log_pochhammer(s, k) - log_pochhammer(t, k));
    default: return 1.0;
  }
}

}  // namespace lsmc
