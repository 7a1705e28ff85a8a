#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lsmc/bounds.hpp"
#include "lsmc/gram.hpp"
#include "lsmc/levy_processes.hpp"
#include "lsmc/meixner_basis.hpp"

namespace lsmc {

/// Exercise payoff h_n at one date.
struct Payoff {
  enum class Kind { Zero, Constant, Never, BasisCombination, Put, Call };
  Kind kind = Kind::Zero;
  /// Constant value, or strike for Put / Call.
  double value = 0.0;
  /// a_0..a_K for h = sum_k a_k psi_{nk}.
  std::vector<double> coeffs;

  static Payoff zero() { return {}; }
  static Payoff constant(double c) { return {Kind::Constant, c, {}}; }
  /// Never exercised: -inf, so max(h, C) = C.
  static Payoff never() { return {Kind::Never, 0.0, {}}; }
  static Payoff basis_combination(std::vector<double> a) {
    return {Kind::BasisCombination, 0.0, std::move(a)};
  }
  static Payoff put(double strike) { return {Kind::Put, strike, {}}; }
  static Payoff call(double strike) { return {Kind::Call, strike, {}}; }

  /// h(x) for a basis at time t (family and parameters from `basis`).
  double operator()(double x, const BasisSpec& basis) const;
};

/// h_0..h_m.
struct PayoffSpec {
  std::vector<Payoff> h;
};

struct RegressionOutcome {
  std::size_t n = 0;
  Eigen::VectorXd beta_hat;
  Eigen::VectorXd gamma_hat;
  std::shared_ptr<const GramMatrix> gram_used;
};

/// gamma = (1/N) sum_i V_{n+1}^{(i)} psi_n(S^{(i)}_{t_n}), beta = Psi_n^{-1} gamma.
/// InputError on non-finite targets; NumericalFailure if the solve
/// residual exceeds 1e-10.
RegressionOutcome regress_step(const PathSet& paths, std::size_t n,
                               const std::vector<double>& next_values, const BasisSpec& spec_n,
                               std::shared_ptr<const GramMatrix> gram);

enum class PathMode { Fresh, Shared };
enum class GramMode { Analytic, Sample };
std::string to_string(PathMode m);
std::string to_string(GramMode m);

struct PriceOptions {
  /// Fresh paths at every backward step; Shared reuses one path set.
  PathMode paths = PathMode::Fresh;
  /// Sample Gram replaces the exact one when set to Sample.
  GramMode gram = GramMode::Analytic;
  /// Added to every stream tag so independent pricing runs can share a seed.
  std::uint32_t stream_offset = 0;
};

struct PriceResult {
  double V0 = 0.0;
  /// Mean of V_1 over the final path set and its standard error.
  double C0 = 0.0;
  double C0_stderr = 0.0;
  /// Outcomes for n = 1..m-1, in increasing n.
  std::vector<RegressionOutcome> steps;
};

/// Backward induction from C_m = 0: C_n = beta_n^T psi_n, V_n = max(h_n, C_n),
/// C_0 = mean V_1, V_0 = max(h_0(0), C_0).
PriceResult lsm_price(const ProcessSpec& process, const TimeGrid& grid, const PayoffSpec& payoff,
                      int K, std::size_t N, std::uint64_t seed, const PriceOptions& options = {});

/// Single-period regression error statistics at (t_1, t_2).
struct MseReport {
  Family family = Family::Charlier;
  int K = 0;
  std::size_t N = 0;
  std::size_t R = 0;
  std::uint64_t seed = 0;
  double t1 = 0.0;
  double t2 = 0.0;
  /// Q = mean_r E_r^T E_r with E_r = Psi_1^{-1} A_r - I.
  Eigen::MatrixXd error_matrix;
  double sup_mse = 0.0;
  double sup_mse_stderr = 0.0;
  /// Top eigenvector of Q.
  Eigen::VectorXd sup_direction;
  /// Q_kk and their standard errors.
  Eigen::VectorXd diag_mse;
  Eigen::VectorXd diag_mse_stderr;
  /// Replication mean of E_r and its entrywise standard error.
  Eigen::MatrixXd mean_error;
  Eigen::MatrixXd mean_error_stderr;
  /// R < 2: standard errors are undefined and reported as NaN.
  bool no_stderr = false;
  std::vector<Eigen::MatrixXd> replication_errors;
  BoundValue bound_upper;
  BoundValue bound_lower;
  std::optional<RegimeVerdict> regime;
};

/// Replicates the single-period regression R times, each with N fresh paths.
MseReport single_period_error_matrix(const BasisSpec& spec1, const BasisSpec& spec2,
                                     std::size_t N, std::size_t R, std::uint64_t seed,
                                     double epsilon = 0.5);

/// mean_r |E_r a|^2 for a unit direction a.
double direction_mse(const MseReport& report, const Eigen::VectorXd& a);

}  // namespace lsmc
