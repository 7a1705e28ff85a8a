#include "lsmc/lsm_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lsmc/errors.hpp"
#include "lsmc/parallel.hpp"
#include "lsmc/rng.hpp"

namespace lsmc {

namespace {

// Stream tags; the low word carries the step or replication index.
constexpr std::uint32_t kPriceTag = 0x10000;
constexpr std::uint32_t kSharedStep = 0xFFFFFFFFu;
constexpr std::uint32_t kSingleTag = 0x20000;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

MeanStderr mean_stderr(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += x;
  const double mean = s / n;
  if (v.size() < 2) return {mean, kNaN};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

/// Value V_n(x) = max(h_n(x), C_n(x)), with C_m = 0.
double value_at(const Payoff& h, double x, const BasisSpec& basis, const Eigen::VectorXd* beta,
                std::span<double> scratch) {
  const double payoff = h(x, basis);
  if (beta == nullptr) return payoff;
  psi_vector(basis, x, scratch);
  double c = 0.0;
  for (Eigen::Index k = 0; k < beta->size(); ++k) c += (*beta)(k) * scratch[k];
  return std::max(payoff, c);
}

}  // namespace

std::string to_string(PathMode m) { return m == PathMode::Fresh ? "fresh" : "shared"; }
std::string to_string(GramMode m) { return m == GramMode::Analytic ? "analytic" : "sample"; }

double Payoff::operator()(double x, const BasisSpec& basis) const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Constant: return value;
    case Kind::Never: return -std::numeric_limits<double>::infinity();
    case Kind::Put: return std::max(value - x, 0.0);
    case Kind::Call: return std::max(x - value, 0.0);
    case Kind::BasisCombination: {
      std::vector<double> psi(coeffs.size());
      make_recurrence(basis).values(x, psi);
      double s = 0.0;
      for (std::size_t k = 0; k < coeffs.size(); ++k) s += coeffs[k] * psi[k];
      return s;
    }
  }
  return 0.0;
}

RegressionOutcome regress_step(const PathSet& paths, std::size_t n,
                               const std::vector<double>& next_values, const BasisSpec& spec_n,
                               std::shared_ptr<const GramMatrix> gram) {
  const std::size_t N = paths.size();
  if (next_values.size() != N) throw InputError("regress_step: one target per path required");
  for (double v : next_values)
    if (!std::isfinite(v)) throw InputError("regress_step: non-finite regression target");
  if (!gram || gram->size() != spec_n.K + 1)
    throw InputError("regress_step: Gram matrix does not match the basis");
  if (n == 0 || n > paths.grid().m()) throw InputError("regress_step: exercise index out of range");

  const int d = spec_n.K + 1;
  const std::size_t blocks = block_count(N);
  std::vector<Eigen::VectorXd> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd psi(d);
    const std::size_t end = std::min(N, (b + 1) * kPathBlock);
    for (std::size_t i = b * kPathBlock; i < end; ++i) {
      psi_vector(spec_n, paths.state(i, n), std::span<double>(psi.data(), d));
      acc += next_values[i] * psi;
    }
    partial[b] = std::move(acc);
  });
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(d);
  for (const auto& p : partial) gamma += p;
  gamma /= static_cast<double>(N);

  const Eigen::VectorXd beta = gram_inverse(*gram) * gamma;
  const double residual = (gram->entries * beta - gamma).norm();
  const double scale = std::max(1.0, gamma.norm());
  if (residual > 1e-10 * scale)
    throw NumericalFailure("regress_step: solve residual exceeds tolerance");
  return RegressionOutcome{n, beta, gamma, std::move(gram)};
}

PriceResult lsm_price(const ProcessSpec& process, const TimeGrid& grid, const PayoffSpec& payoff,
                      int K, std::size_t N, std::uint64_t seed, const PriceOptions& options) {
  process.validate();
  const std::size_t m = grid.m();
  if (payoff.h.size() != m + 1) throw InvalidSpec("lsm_price: payoff needs h_0..h_m");
  if (K < 0) throw InvalidSpec("lsm_price: K must be nonnegative");
  for (const auto& h : payoff.h)
    if (h.kind == Payoff::Kind::BasisCombination && h.coeffs.empty())
      throw InvalidSpec("lsm_price: empty basis combination");

  std::optional<PathSet> shared;
  if (options.paths == PathMode::Shared)
    shared = simulate(process, grid, N, seed, stream_id(kPriceTag + options.stream_offset, kSharedStep));
  auto paths_for = [&](std::size_t last) {
    if (shared) return *shared;
    return simulate(process, grid.prefix(last), N, seed,
                    stream_id(kPriceTag + options.stream_offset, static_cast<std::uint32_t>(last)));
  };

  PriceResult result;
  std::optional<Eigen::VectorXd> beta_next;  // beta_{n+1}; empty means C_{n+1} = 0
  for (std::size_t n = m - 1; n >= 1; --n) {
    const PathSet paths = paths_for(n + 1);
    const BasisSpec spec_n = basis_for(process, K, grid[n]);
    const BasisSpec spec_next = basis_for(process, K, grid[n + 1]);

    std::vector<double> targets(N);
    parallel_for(block_count(N), [&](std::size_t b) {
      std::vector<double> scratch(static_cast<std::size_t>(K) + 1);
      const std::size_t end = std::min(N, (b + 1) * kPathBlock);
      for (std::size_t i = b * kPathBlock; i < end; ++i)
        targets[i] = value_at(payoff.h[n + 1], paths.state(i, n + 1), spec_next,
                              beta_next ? &*beta_next : nullptr, scratch);
    });

    std::shared_ptr<const GramMatrix> gram =
        options.gram == GramMode::Analytic
            ? std::make_shared<const GramMatrix>(gram_analytic(spec_n))
            : std::make_shared<const GramMatrix>(gram_sample(spec_n, paths, n));
    result.steps.push_back(regress_step(paths, n, targets, spec_n, std::move(gram)));
    beta_next = result.steps.back().beta_hat;
  }
  std::reverse(result.steps.begin(), result.steps.end());

  // C_0 = mean of V_1 on one more path set.
  const PathSet paths = paths_for(1);
  const BasisSpec spec1 = basis_for(process, K, grid[1]);
  std::vector<double> v1(N);
  parallel_for(block_count(N), [&](std::size_t b) {
    std::vector<double> scratch(static_cast<std::size_t>(K) + 1);
    const std::size_t end = std::min(N, (b + 1) * kPathBlock);
    for (std::size_t i = b * kPathBlock; i < end; ++i)
      v1[i] = value_at(payoff.h[1], paths.state(i, 1), spec1, &*beta_next, scratch);
  });
  // Block-ordered sum keeps C_0 independent of the worker count.
  std::vector<double> block_sums(block_count(N), 0.0);
  std::vector<double> block_sq(block_count(N), 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    block_sums[i / kPathBlock] += v1[i];
    block_sq[i / kPathBlock] += v1[i] * v1[i];
  }
  double sum = 0.0, sq = 0.0;
  for (std::size_t b = 0; b < block_sums.size(); ++b) {
    sum += block_sums[b];
    sq += block_sq[b];
  }
  const double nn = static_cast<double>(N);
  result.C0 = sum / nn;
  result.C0_stderr =
      N > 1 ? std::sqrt(std::max(0.0, sq / nn - result.C0 * result.C0) / (nn - 1.0)) : kNaN;
  BasisSpec spec0 = spec1;
  spec0.t = 0.0;  // h_0 is evaluated at S_0 = 0 without validating t = 0
  result.V0 = std::max(payoff.h[0](0.0, spec0), result.C0);
  return result;
}

MseReport single_period_error_matrix(const BasisSpec& spec1, const BasisSpec& spec2,
                                     std::size_t N, std::size_t R, std::uint64_t seed,
                                     double epsilon) {
  spec1.validate();
  spec2.validate();
  if (spec1.family != spec2.family || spec1.K != spec2.K || spec1.q != spec2.q ||
      spec1.zeta != spec2.zeta)
    throw InvalidSpec("single_period_error_matrix: specs must differ only in t");
  if (!(spec1.t < spec2.t)) throw InvalidSpec("single_period_error_matrix: need t1 < t2");
  if (N == 0 || R == 0) throw InvalidSpec("single_period_error_matrix: need N >= 1 and R >= 1");

  const ProcessSpec process = process_spec_for(spec1);
  const TimeGrid grid({0.0, spec1.t, spec2.t});
  const int d = spec1.K + 1;
  const Eigen::MatrixXd inv = gram_inverse(gram_analytic(spec1));
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);

  MseReport rep;
  rep.family = spec1.family;
  rep.K = spec1.K;
  rep.N = N;
  rep.R = R;
  rep.seed = seed;
  rep.t1 = spec1.t;
  rep.t2 = spec2.t;
  rep.replication_errors.resize(R);

  parallel_for(R, [&](std::size_t r) {
    const PathSet paths =
        simulate(process, grid, N, seed, stream_id(kSingleTag, static_cast<std::uint32_t>(r)));
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd p1(d), p2(d);
    // Block-ordered accumulation, as everywhere else.
    for (std::size_t b = 0; b < block_count(N); ++b) {
      Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(d, d);
      const std::size_t end = std::min(N, (b + 1) * kPathBlock);
      for (std::size_t i = b * kPathBlock; i < end; ++i) {
        psi_vector(spec1, paths.state(i, 1), std::span<double>(p1.data(), d));
        psi_vector(spec2, paths.state(i, 2), std::span<double>(p2.data(), d));
        blk.noalias() += p1 * p2.transpose();
      }
      a += blk;
    }
    a /= static_cast<double>(N);
    rep.replication_errors[r] = inv * a - eye;
  });

  const double rr = static_cast<double>(R);
  rep.error_matrix = Eigen::MatrixXd::Zero(d, d);
  rep.mean_error = Eigen::MatrixXd::Zero(d, d);
  for (const auto& e : rep.replication_errors) {
    rep.error_matrix += e.transpose() * e;
    rep.mean_error += e;
  }
  rep.error_matrix /= rr;
  rep.mean_error /= rr;
  rep.error_matrix = 0.5 * (rep.error_matrix + rep.error_matrix.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rep.error_matrix);
  rep.sup_mse = std::max(0.0, eig.eigenvalues()(d - 1));
  rep.sup_direction = eig.eigenvectors().col(d - 1);
  rep.diag_mse = rep.error_matrix.diagonal();

  rep.no_stderr = R < 2;
  rep.diag_mse_stderr = Eigen::VectorXd::Constant(d, kNaN);
  rep.mean_error_stderr = Eigen::MatrixXd::Constant(d, d, kNaN);
  rep.sup_mse_stderr = kNaN;
  if (!rep.no_stderr) {
    std::vector<double> per(R);
    for (std::size_t r = 0; r < R; ++r)
      per[r] = (rep.replication_errors[r] * rep.sup_direction).squaredNorm();
    rep.sup_mse_stderr = mean_stderr(per).stderr_;
    for (int k = 0; k < d; ++k) {
      for (std::size_t r = 0; r < R; ++r) per[r] = rep.replication_errors[r].col(k).squaredNorm();
      rep.diag_mse_stderr(k) = mean_stderr(per).stderr_;
      for (int j = 0; j < d; ++j) {
        for (std::size_t r = 0; r < R; ++r) per[r] = rep.replication_errors[r](j, k);
        rep.mean_error_stderr(j, k) = mean_stderr(per).stderr_;
      }
    }
  }

  rep.bound_upper = upper_bound(spec1.K, static_cast<double>(N), spec1, spec2);
  rep.bound_lower = lower_bound(spec1.K, static_cast<double>(N), spec1, spec2);
  if (process.kind != ProcessKind::Brownian)
    rep.regime = regime(spec1.K, static_cast<double>(N), process.kind, epsilon);
  return rep;
}

double direction_mse(const MseReport& report, const Eigen::VectorXd& a) {
  const double norm = a.norm();
  if (!(norm > 0.0) || a.size() != report.K + 1)
    throw InputError("direction_mse: need a nonzero direction of length K+1");
  const Eigen::VectorXd u = a / norm;
  double s = 0.0;
  for (const auto& e : report.replication_errors) s += (e * u).squaredNorm();
  return s / static_cast<double>(report.replication_errors.size());
}

}  // namespace lsmc
