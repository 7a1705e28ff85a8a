#include "lsmc/gram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <tuple>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <fmt/format.h>

#include "lsmc/errors.hpp"
#include "lsmc/moment_oracle.hpp"
#include "lsmc/parallel.hpp"

namespace lsmc {

namespace {

using mp = boost::multiprecision::cpp_bin_float_50;

/// log E[psi_k^2] for the orthogonal families.
double log_norm_sq(const BasisSpec& spec, int k) {
  const double t = spec.t;
  switch (spec.family) {
    case Family::Charlier:
    case Family::Hermite:
      return k * std::log(t) + log_factorial(k);
    case Family::Laguerre:
      return log_pochhammer(t, k) - log_factorial(k);
    case Family::MeixnerPoly:
      return log_pochhammer(t, k) + log_factorial(k) - k * std::log(spec.q);
    case Family::MeixnerPollaczek:
      return log_pochhammer(2 * t, k) - log_factorial(k);
  }
  return 0.0;
}

/// Gauss-Laguerre rule for the normalized Gamma(alpha+1) law, n nodes.
void gauss_laguerre(int n, const mp& alpha, std::vector<mp>& nodes, std::vector<mp>& weights) {
  // Golub-Welsch in double for starting values.
  const double a = static_cast<double>(alpha);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    jac(i, i) = 2.0 * i + a + 1.0;
    if (i + 1 < n) jac(i, i + 1) = jac(i + 1, i) = std::sqrt((i + 1.0) * (i + 1.0 + a));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac, Eigen::EigenvaluesOnly);
  nodes.resize(n);
  weights.resize(n);

  // L_n, L_{n-1} at x by the standard three-term recurrence.
  auto laguerre = [&](const mp& x, mp& ln, mp& lnm1) {
    mp p0 = 1;
    mp p1 = alpha + 1 - x;
    if (n == 1) {
      ln = p1;
      lnm1 = p0;
      return;
    }
    for (int j = 1; j < n; ++j) {
      const mp p2 = ((2 * j + alpha + 1 - x) * p1 - (j + alpha) * p0) / (j + 1);
      p0 = p1;
      p1 = p2;
    }
    ln = p1;
    lnm1 = p0;
  };

  mp lead = 1;  // (alpha+1)_n / n!
  for (int j = 0; j < n; ++j) lead *= (alpha + 1 + j) / (j + 1);

  const mp tol("1e-45");
  for (int i = 0; i < n; ++i) {
    mp x = eig.eigenvalues()(i);
    mp ln, lnm1, deriv;
    for (int it = 0; it < 100; ++it) {
      laguerre(x, ln, lnm1);
      deriv = (n * ln - (n + alpha) * lnm1) / x;
      const mp step = ln / deriv;
      x -= step;
      if (abs(step) <= tol * abs(x)) break;
    }
    laguerre(x, ln, lnm1);
    deriv = (n * ln - (n + alpha) * lnm1) / x;
    nodes[i] = x;
    weights[i] = lead / (x * deriv * deriv);
  }
}

/// E[psi_k psi_l] for k, l <= D under Gamma(t), by an n-node rule.
std::vector<mp> laguerre_gram_mp(double t, int D, int n) {
  std::vector<mp> nodes, weights;
  const mp alpha = mp(t) - 1;
  gauss_laguerre(n, alpha, nodes, weights);
  BasisSpec spec{Family::Laguerre, D, t};
  const auto rec = make_recurrence<mp>(spec, mp(0));
  const std::size_t size = static_cast<std::size_t>(D) + 1;
  std::vector<mp> g(size * size, mp(0));
  std::vector<mp> psi(size);
  for (int i = 0; i < n; ++i) {
    rec.values(nodes[i], psi);
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c) g[r * size + c] += weights[i] * psi[r] * psi[c];
  }
  return g;
}

/// Cached quadrature Gram for Laguerre at degree D, as doubles.
std::shared_ptr<const Eigen::MatrixXd> laguerre_gram(double t, int D) {
  static std::shared_mutex mutex;
  static std::map<std::pair<double, int>, std::shared_ptr<const Eigen::MatrixXd>> cache;
  const auto key = std::make_pair(t, D);
  {
    std::shared_lock lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const auto coarse = laguerre_gram_mp(t, D, D + 5);
  const auto fine = laguerre_gram_mp(t, D, D + 9);
  const std::size_t size = static_cast<std::size_t>(D) + 1;
  mp scale = 0;
  mp diff = 0;
  for (std::size_t j = 0; j < fine.size(); ++j) {
    scale = std::max(scale, mp(abs(fine[j])));
    diff = std::max(diff, mp(abs(fine[j] - coarse[j])));
  }
  const double achieved = static_cast<double>(diff / scale);
  if (achieved > 1e-30)
    throw PrecisionError("Laguerre Gram quadrature did not converge", achieved);
  auto out = std::make_shared<Eigen::MatrixXd>(size, size);
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) {
      // Orthogonality holds exactly; drop quadrature round-off.
      const mp v = fine[r * size + c];
      (*out)(r, c) = (r != c && abs(v) < mp("1e-35") * scale) ? 0.0 : static_cast<double>(v);
    }
  std::unique_lock lock(mutex);
  return cache.emplace(key, std::move(out)).first->second;
}

}  // namespace

std::string to_string(GramProvenance p) {
  switch (p) {
    case GramProvenance::Analytic: return "analytic";
    case GramProvenance::PaperTridiagonal: return "paper_tridiagonal";
    case GramProvenance::Sample: return "sample";
  }
  return "unknown";
}

bool GramMatrix::is_diagonal() const {
  for (int r = 0; r < size(); ++r)
    for (int c = 0; c < size(); ++c)
      if (r != c && entries(r, c) != 0.0) return false;
  return true;
}

GramMatrix gram_analytic(const BasisSpec& spec) {
  spec.validate();
  const int n = spec.K + 1;
  GramMatrix g{spec, Eigen::MatrixXd::Zero(n, n), GramProvenance::Analytic, std::nullopt};
  if (spec.family == Family::Laguerre) {
    g.entries = *laguerre_gram(spec.t, spec.K);
    return g;
  }
  for (int k = 0; k < n; ++k) {
    const double lg = log_norm_sq(spec, k);
    if (std::fabs(lg) >= 700.0) throw RangeError("Gram entry exceeds double range", lg);
    g.entries(k, k) = std::exp(lg);
  }
  // Integer-valued diagonals are recomputed by exact products.
  if (spec.family == Family::Charlier || spec.family == Family::Hermite) {
    double f = 1.0;
    double tp = 1.0;
    for (int k = 0; k < n; ++k) {
      if (k > 0) {
        f *= k;
        tp *= spec.t;
      }
      g.entries(k, k) = tp * f;
    }
  }
  return g;
}

SignedLog gram_entry_log(const BasisSpec& spec, int k, int l) {
  if (k < 0 || l < 0) throw InputError("gram_entry_log: negative degree");
  if (k != l) return SignedLog::zero();
  return SignedLog::from_log(1, log_norm_sq(spec, k));
}

double binom_real(double a, int k) {
  if (k < 0) return 0.0;
  return std::exp(std::lgamma(a + 1.0) - std::lgamma(k + 1.0) - std::lgamma(a - k + 1.0));
}

GramMatrix gram_paper_gamma(int K, double t) {
  if (K < 0 || !(t > 0.0)) throw InvalidSpec("gram_paper_gamma: need K >= 0 and t > 0");
  const int n = K + 1;
  GramMatrix g{BasisSpec{Family::Laguerre, K, t}, Eigen::MatrixXd::Zero(n, n),
               GramProvenance::PaperTridiagonal, std::nullopt};
  for (int k = 0; k < n; ++k) {
    g.entries(k, k) = (2.0 * k + t) / (k + t) * binom_real(k + t, k);
    if (k + 1 < n) g.entries(k, k + 1) = g.entries(k + 1, k) = -binom_real(k + t, k);
  }
  return g;
}

GramMatrix gram_sample(const BasisSpec& spec, const PathSet& paths, std::size_t n) {
  spec.validate();
  if (n == 0 || n > paths.grid().m()) throw InputError("gram_sample: exercise index out of range");
  if (family_for(paths.spec().kind) != spec.family)
    throw InputError("gram_sample: basis family does not match the process");
  if (std::fabs(paths.grid()[n] - spec.t) > 1e-12 * spec.t)
    throw InputError("gram_sample: basis time differs from the grid time");

  const int d = spec.K + 1;
  const std::size_t N = paths.size();
  const std::size_t blocks = block_count(N);
  std::vector<Eigen::MatrixXd> s1(blocks), s2(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd a2 = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd v(d);
    const std::size_t end = std::min(N, (b + 1) * kPathBlock);
    for (std::size_t i = b * kPathBlock; i < end; ++i) {
      psi_vector(spec, paths.state(i, n), std::span<double>(v.data(), d));
      const Eigen::MatrixXd outer = v * v.transpose();
      a += outer;
      a2 += outer.cwiseProduct(outer);
    }
    s1[b] = std::move(a);
    s2[b] = std::move(a2);
  });
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t b = 0; b < blocks; ++b) {
    sum += s1[b];
    sum2 += s2[b];
  }
  const double nn = static_cast<double>(N);
  GramMatrix g{spec, sum / nn, GramProvenance::Sample, SampleMeta{}};
  Eigen::MatrixXd var = (sum2 / nn - g.entries.cwiseProduct(g.entries)).cwiseMax(0.0);
  g.sample->N = N;
  g.sample->seed = paths.seed();
  g.sample->stderr_ = N > 1 ? Eigen::MatrixXd((var * (nn / (nn - 1.0)) / nn).cwiseSqrt())
                            : Eigen::MatrixXd::Constant(d, d, std::numeric_limits<double>::infinity());
  g.sample->rank_deficient = N < static_cast<std::size_t>(d);
  return g;
}

Eigen::MatrixXd gram_inverse(const GramMatrix& g) {
  const Eigen::MatrixXd& m = g.entries;
  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DecompositionError("gram_inverse: matrix is not symmetric");
  if (g.is_diagonal()) {
    if ((m.diagonal().array() <= 0.0).any())
      throw DecompositionError("gram_inverse: nonpositive diagonal entry");
    return m.diagonal().cwiseInverse().asDiagonal();
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw DecompositionError("gram_inverse: matrix is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

std::vector<double> diag_recursion(int K, double t) {
  if (K < 1) throw InputError("diag_recursion: need K >= 1");
  std::vector<double> e(static_cast<std::size_t>(K) + 2, 0.0);
  e[K] = K / (K + t) / binom_real(K + t - 1.0, K - 1);
  for (int k = K; k >= 1; --k)
    e[k - 1] = (k + t) / k * ((2.0 * k + t) / (k + t) * e[k] - e[k + 1]);
  e.pop_back();
  return e;
}

double frobenius(const Eigen::MatrixXd& m) {
  double sum = 0.0;
  double comp = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, j) * m(i, j);
      const double s = sum + v;
      comp += (sum >= v) ? (sum - s) + v : (v - s) + sum;
      sum = s;
    }
  return std::sqrt(sum + comp);
}

SignedLog frobenius_sq_log(const std::vector<SignedLog>& entries) {
  SignedLogSum sum;
  for (const auto& e : entries) sum.add(e * e);
  return sum.result();
}

SignedLog gram_norm_sq_log(const BasisSpec& spec, bool inverse) {
  spec.validate();
  std::vector<SignedLog> diag;
  for (int k = 0; k <= spec.K; ++k) {
    const double lg = log_norm_sq(spec, k);
    diag.push_back(SignedLog::from_log(1, inverse ? -lg : lg));
  }
  return frobenius_sq_log(diag);
}

GammaGramFinding gamma_gram_finding(int K, double t, std::size_t N, std::uint64_t seed) {
  GammaGramFinding f;
  f.K = K;
  f.t = t;
  f.N = N;
  f.seed = seed;
  const BasisSpec spec{Family::Laguerre, K, t};
  f.paper = gram_paper_gamma(K, t).entries;
  f.direct = gram_analytic(spec).entries;
  const PathSet paths = simulate(ProcessSpec{ProcessKind::Gamma}, TimeGrid({0.0, t, 2.0 * t}), N,
                                 seed, 0);
  const GramMatrix sample = gram_sample(spec, paths, 1);
  f.sample = sample.entries;
  // Exact standard errors under the Gamma(t) law; the sample ones miss the
  // heavy tails of the degree-2K products.
  const ProcessSpec gamma{ProcessKind::Gamma};
  const auto polys = moments::psi_polys(spec);
  f.stderr_.resize(K + 1, K + 1);
  for (int r = 0; r <= K; ++r)
    for (int c = 0; c <= K; ++c) {
      const auto prod = moments::multiply(polys[r], polys[c]);
      const moments::Real mean = moments::expect(gamma, t, t, prod, moments::Poly{1});
      const moments::Real second = moments::expect(gamma, t, t, moments::multiply(prod, prod),
                                                   moments::Poly{1});
      f.stderr_(r, c) = sqrt((second - mean * mean) / N).convert_to<double>();
    }

  auto max_z = [&](const Eigen::MatrixXd& candidate) {
    double z = 0.0;
    for (int r = 0; r <= K; ++r)
      for (int c = 0; c <= K; ++c) {
        const double diff = std::fabs(candidate(r, c) - f.sample(r, c));
        const double se = f.stderr_(r, c);
        if (se > 0.0)
          z = std::max(z, diff / se);
        else if (diff > 1e-12 * std::max(1.0, std::fabs(candidate(r, c))))
          z = std::numeric_limits<double>::infinity();
      }
    return z;
  };
  f.max_z_paper = max_z(f.paper);
  f.max_z_direct = max_z(f.direct);
  f.paper_agrees = f.max_z_paper <= 5.0;
  f.direct_agrees = f.max_z_direct <= 5.0;
  f.summary = fmt::format(
      "Gamma Gram K={} t={} N={}: printed tridiagonal max z={:.3g} ({}), direct expectation max "
      "z={:.3g} ({})",
      K, t, N, f.max_z_paper, f.paper_agrees ? "agrees" : "DISAGREES", f.max_z_direct,
      f.direct_agrees ? "agrees" : "DISAGREES");
  return f;
}

}  // namespace lsmc
