#include "lsmc/moment_oracle.hpp"

#include <boost/math/constants/constants.hpp>

#include "lsmc/errors.hpp"

namespace lsmc::moments {

namespace {

Real binom(int n, int k) {
  Real r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Cumulants kappa_1..kappa_nmax (index 0 unused).
std::vector<Real> cumulants(const ProcessSpec& spec, double dt, int nmax) {
  std::vector<Real> kappa(nmax + 1, Real(0));
  const Real t = dt;
  switch (spec.kind) {
    case ProcessKind::Poisson:
      for (int n = 1; n <= nmax; ++n) kappa[n] = t;
      break;
    case ProcessKind::Gamma: {
      Real fact = 1;
      for (int n = 1; n <= nmax; ++n) {
        kappa[n] = t * fact;
        fact *= n;
      }
      break;
    }
    case ProcessKind::Pascal: {
      // kappa_n = t Li_{1-n}(q), via Eulerian numbers.
      const Real q = spec.q;
      std::vector<Real> euler{Real(1)};  // row s of A(s, k)
      for (int n = 1; n <= nmax; ++n) {
        const int s = n - 1;
        if (s == 0) {
          kappa[n] = t * q / (1 - q);
          continue;
        }
        std::vector<Real> next(s, Real(0));
        for (int k = 0; k < s; ++k) {
          const Real keep = k < static_cast<int>(euler.size()) ? euler[k] : Real(0);
          const Real prev = k > 0 ? euler[k - 1] : Real(0);
          next[k] = (k + 1) * keep + (s - k) * prev;
        }
        euler = next;
        Real acc = 0, qk = q;
        for (int k = 0; k < s; ++k, qk *= q) acc += euler[k] * qk;
        kappa[n] = t * acc / pow(1 - q, s + 1);
      }
      break;
    }
    case ProcessKind::Meixner: {
      // K(s) = 2t (log sin zeta - log cos(theta - s/2)), theta = pi/2 - zeta;
      // d^m/dy^m (-log cos y) is a polynomial in tan y.
      const Real theta = boost::math::constants::half_pi<Real>() - Real(spec.zeta);
      const Real T = tan(theta);
      Poly Q{Real(0), Real(1)};  // tan y
      Real half_pow = Real(-0.5);
      for (int n = 1; n <= nmax; ++n) {
        Real v = 0, tp = 1;
        for (const Real& c : Q) {
          v += c * tp;
          tp *= T;
        }
        kappa[n] = 2 * t * half_pow * v;
        half_pow *= Real(-0.5);
        Poly dq(Q.size() + 1, Real(0));
        for (std::size_t i = 1; i < Q.size(); ++i) {
          const Real d = Q[i] * static_cast<int>(i);
          dq[i - 1] += d;
          dq[i + 1] += d;
        }
        Q = dq;
      }
      break;
    }
    case ProcessKind::Brownian:
      if (nmax >= 2) kappa[2] = t;
      break;
  }
  return kappa;
}

}  // namespace

std::vector<Real> raw_moments(const ProcessSpec& spec, double dt, int nmax) {
  spec.validate();
  if (nmax < 0) throw InputError("raw_moments: negative order");
  std::vector<Real> m(nmax + 1, Real(0));
  m[0] = 1;
  if (dt == 0.0) return m;
  if (!(dt > 0.0)) throw InvalidSpec("raw_moments: dt must be nonnegative");
  const std::vector<Real> kappa = cumulants(spec, dt, nmax);
  for (int n = 1; n <= nmax; ++n)
    for (int k = 1; k <= n; ++k) m[n] += binom(n - 1, k - 1) * kappa[k] * m[n - k];
  return m;
}

std::vector<Poly> psi_polys(const BasisSpec& spec) {
  spec.validate();
  const auto rec = make_recurrence<Real>(spec, Real(spec.zeta));
  std::vector<Poly> out;
  out.push_back(Poly{Real(1)});
  for (int n = 0; n < spec.K; ++n) {
    // A_n(x) is affine in x.
    const Real a0 = rec.a(n, Real(0));
    const Real a1 = rec.a(n, Real(1)) - a0;
    Poly next(n + 2, Real(0));
    for (std::size_t i = 0; i < out[n].size(); ++i) {
      next[i] += a0 * out[n][i];
      next[i + 1] += a1 * out[n][i];
    }
    if (n > 0) {
      const Real c = rec.c(n);
      for (std::size_t i = 0; i < out[n - 1].size(); ++i) next[i] -= c * out[n - 1][i];
    }
    out.push_back(std::move(next));
  }
  return out;
}

Poly multiply(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1, Real(0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

Real expect(const ProcessSpec& spec, double t1, double t2, const Poly& f, const Poly& g) {
  if (!(t1 > 0.0) || !(t2 >= t1)) throw InputError("expect: need 0 < t1 <= t2");
  const int df = static_cast<int>(f.size()) - 1;
  const int dg = static_cast<int>(g.size()) - 1;
  if (df < 0 || dg < 0) return 0;
  const auto m1 = raw_moments(spec, t1, df + dg);
  const auto md = raw_moments(spec, t2 - t1, dg);
  // E[f(X) X^r] for r = 0..dg.
  std::vector<Real> fx(dg + 1, Real(0));
  for (int r = 0; r <= dg; ++r)
    for (int a = 0; a <= df; ++a) fx[r] += f[a] * m1[a + r];
  Real total = 0;
  for (int n = 0; n <= dg; ++n) {
    if (g[n] == 0) continue;
    Real inner = 0;
    for (int r = 0; r <= n; ++r) inner += binom(n, r) * md[n - r] * fx[r];
    total += g[n] * inner;
  }
  return total;
}

}  // namespace lsmc::moments
