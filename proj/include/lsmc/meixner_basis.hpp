#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsmc/levy_processes.hpp"
#include "lsmc/signed_log.hpp"

namespace lsmc {

/// Orthogonal polynomial family of a Levy-Meixner system.
enum class Family { Charlier, Laguerre, MeixnerPoly, MeixnerPollaczek, Hermite };

std::string to_string(Family family);
Family family_for(ProcessKind kind);
ProcessKind process_for(Family family);

/// Scaled basis psi_{n0..nK} at time t_n.
///
///   Charlier          psi_k = t^k C_k(x, t)
///   Laguerre          psi_k = L_k^{(t-1)}(x)
///   MeixnerPoly       psi_k = (t)_k M_k(x; t, q)
///   MeixnerPollaczek  psi_k = P_k(x; t, zeta)
///   Hermite           psi_k = H_k(x, t), exp(xz - t z^2/2) = sum H_k z^k / k!
///
/// Each psi_k(X_t) is a martingale in t along the matching Levy process.
struct BasisSpec {
  Family family = Family::Charlier;
  int K = 0;
  double t = 1.0;
  double q = 0.5;
  double zeta = std::numbers::pi / 2;

  void validate() const;
  /// Same family and parameters at another time / degree.
  BasisSpec at(double time) const;
  BasisSpec with_degree(int degree) const;
  friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

BasisSpec basis_for(const ProcessSpec& process, int K, double t);
ProcessSpec process_spec_for(const BasisSpec& basis);

/// Three-term recurrence psi_{n+1} = A_n(x) psi_n - C_n psi_{n-1} of the
/// scaled basis; Real may be double or an extended-precision type.
template <class Real>
struct BasisRecurrence {
  Family family;
  Real t;
  Real q;
  Real cos_zeta;
  Real sin_zeta;

  Real a(int n, const Real& x) const {
    const Real nn = n;
    switch (family) {
      case Family::Charlier: return nn + t - x;
      case Family::Laguerre: return (2 * nn + t - x) / (nn + 1);
      case Family::MeixnerPoly: return ((q - 1) * x + nn + (nn + t) * q) / q;
      case Family::MeixnerPollaczek: return 2 * (x * sin_zeta + (nn + t) * cos_zeta) / (nn + 1);
      case Family::Hermite: return x;
    }
    return Real(0);
  }
  Real c(int n) const {
    const Real nn = n;
    switch (family) {
      case Family::Charlier: return nn * t;
      case Family::Laguerre: return (nn + t - 1) / (nn + 1);
      case Family::MeixnerPoly: return nn * (nn + t - 1) / q;
      case Family::MeixnerPollaczek: return (nn + 2 * t - 1) / (nn + 1);
      case Family::Hermite: return nn * t;
    }
    return Real(0);
  }

  /// psi_0..psi_{out.size()-1} at x.
  void values(const Real& x, std::span<Real> out) const {
    if (out.empty()) return;
    out[0] = Real(1);
    if (out.size() > 1) out[1] = a(0, x);
    for (std::size_t n = 1; n + 1 < out.size(); ++n) {
      const int k = static_cast<int>(n);
      out[n + 1] = a(k, x) * out[n] - c(k) * out[n - 1];
    }
  }
};

template <class Real>
BasisRecurrence<Real> make_recurrence(const BasisSpec& spec, const Real& zeta) {
  using std::cos;
  using std::sin;
  return BasisRecurrence<Real>{spec.family, Real(spec.t), Real(spec.q), Real(cos(zeta)),
                               Real(sin(zeta))};
}

inline BasisRecurrence<double> make_recurrence(const BasisSpec& spec) {
  return make_recurrence<double>(spec, spec.zeta);
}

/// Rising factorial (t)_k = t (t+1) ... (t+k-1); (t)_0 = 1.
double pochhammer(double t, int k);

/// Standard-convention polynomial: C_k(x,t), L_k^{(t-1)}(x), M_k(x;t,q),
/// P_k(x;t,zeta) or H_k(x,t). Throws RangeError when the value leaves the
/// double range.
double eval_poly(Family family, int k, double x, double t, double q = 0.5,
                 double zeta = std::numbers::pi / 2);

/// psi_{nk}(x); requires 0 <= k <= spec.K.
double psi(const BasisSpec& spec, int k, double x);
/// psi_{nk}(x) in log space; never overflows.
SignedLog psi_log(const BasisSpec& spec, int k, double x);
/// (psi_{n0}(x), ..., psi_{nK}(x)) in one recurrence pass.
std::vector<double> psi_vector(const BasisSpec& spec, double x);
void psi_vector(const BasisSpec& spec, double x, std::span<double> out);

/// lambda with E[Q_k(X_t, t) | X_s] = lambda Q_k(X_s, s) for the standard
/// polynomial Q_k of the family; requires 0 < s <= t.
double martingale_factor(Family family, int k, double s, double t);

}  // namespace lsmc
