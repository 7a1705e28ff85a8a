#pragma once

#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "lsmc/levy_processes.hpp"
#include "lsmc/meixner_basis.hpp"

namespace lsmc {

/// Exact polynomial expectations from increment cumulants, in 50-digit
/// arithmetic. Independent of the connection coefficients, so it serves as
/// the reference for Monte Carlo standard errors and moment cross-checks.
namespace moments {

using Real = boost::multiprecision::cpp_bin_float_50;
/// Monomial coefficients, lowest degree first.
using Poly = std::vector<Real>;

/// E[X^n], n = 0..nmax, for an increment of length dt started at 0.
std::vector<Real> raw_moments(const ProcessSpec& spec, double dt, int nmax);

/// psi_0..psi_K of `spec` as monomial polynomials.
std::vector<Poly> psi_polys(const BasisSpec& spec);

Poly multiply(const Poly& a, const Poly& b);

/// E[f(X_{t1}) g(X_{t2})] for X_0 = 0 and 0 < t1 <= t2.
Real expect(const ProcessSpec& spec, double t1, double t2, const Poly& f, const Poly& g);

}  // namespace moments
}  // namespace lsmc
