#pragma once

#include <memory>
#include <vector>

#include "lsmc/meixner_basis.hpp"
#include "lsmc/signed_log.hpp"

namespace lsmc {

/// Coefficients d_{k,0..2k}(t) with psi_k(x)^2 = sum_i d_ki psi_i(x) at a
/// fixed time t.
struct ConnectionTable {
  Family family = Family::Charlier;
  int k = 0;
  double t = 1.0;
  double q = 0.5;
  double zeta = 0.0;
  std::vector<SignedLog> coeffs;
  /// Relative residual of the linear solve; only set by connection_oracle.
  double oracle_residual = 0.0;
};

/// Finite-sum closed forms, s = max(i,k) .. k + floor(i/2). The basis
/// degree spec.K is ignored; only family, t, q, zeta are used.
ConnectionTable connection_analytic(const BasisSpec& spec, int k);

/// The closed forms with the prefactors exactly as printed in the source
/// article. They do not expand psi_k^2 and are kept only so `verify` can
/// report the mismatch.
ConnectionTable connection_paper_literal(const BasisSpec& spec, int k);

/// Brute-force reference: solves V c = y with V[r][i] = psi_i(x_r),
/// y[r] = psi_k(x_r)^2 at 2k+1 nodes in 50-digit arithmetic. Nodes are
/// 0..2k for discrete families and Chebyshev points on [0, 2k+2] otherwise.
/// Requires k <= 12.
ConnectionTable connection_oracle(const BasisSpec& spec, int k);

/// Cached connection_analytic; safe for concurrent use.
std::shared_ptr<const ConnectionTable> connection_table(const BasisSpec& spec, int k);

struct ExpandedSquare {
  double value = 0.0;
  /// Largest |d_ki psi_i(x)|.
  double largest_term = 0.0;
  /// |value| < 1e-8 * largest_term.
  bool cancellation = false;
};

/// sum_i d_ki(t) psi_i(x), compensated summation.
ExpandedSquare expand_square(const BasisSpec& spec, int k, double x);

/// Test hook: when enabled, connection_analytic flips the sign of d_{k,2k-2}.
void set_connection_fault(bool enabled);
bool connection_fault();

}  // namespace lsmc
