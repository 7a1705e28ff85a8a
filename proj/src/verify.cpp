#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lsmc/bounds.hpp"
#include "lsmc/connection_coeffs.hpp"
#include "lsmc/errors.hpp"
#include "lsmc/experiment.hpp"
#include "lsmc/moment_oracle.hpp"
#include "lsmc/parallel.hpp"

namespace lsmc {

namespace {

using nlohmann::json;

constexpr double kZ = 5.0;
constexpr ProcessKind kFamilies[] = {ProcessKind::Poisson, ProcessKind::Gamma,
                                     ProcessKind::Pascal, ProcessKind::Meixner};

/// Sample means and standard errors of f(path) over all paths, f giving
/// `width` values per path.
struct Moments {
  std::vector<double> mean;
  std::vector<double> se;
};

template <class F>
Moments path_moments(const PathSet& paths, std::size_t width, F f) {
  const std::size_t N = paths.size();
  const std::size_t blocks = block_count(N);
  std::vector<std::vector<double>> s1(blocks), s2(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    std::vector<double> a(width, 0.0), a2(width, 0.0), v(width);
    const std::size_t end = std::min(N, (b + 1) * kPathBlock);
    for (std::size_t i = b * kPathBlock; i < end; ++i) {
      f(i, v);
      for (std::size_t c = 0; c < width; ++c) {
        a[c] += v[c];
        a2[c] += v[c] * v[c];
      }
    }
    s1[b] = std::move(a);
    s2[b] = std::move(a2);
  });
  Moments m{std::vector<double>(width, 0.0), std::vector<double>(width, 0.0)};
  std::vector<double> sq(width, 0.0);
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t c = 0; c < width; ++c) {
      m.mean[c] += s1[b][c];
      sq[c] += s2[b][c];
    }
  const double n = static_cast<double>(N);
  for (std::size_t c = 0; c < width; ++c) {
    m.mean[c] /= n;
    m.se[c] = std::sqrt(std::max(0.0, sq[c] / n - m.mean[c] * m.mean[c]) / (n - 1.0));
  }
  return m;
}

/// |estimate - exact| in standard errors; zero-variance entries must match.
double zscore(double estimate, double se, double exact) {
  const double diff = std::fabs(estimate - exact);
  if (se > 0.0) return diff / se;
  return diff <= 1e-12 * std::max(1.0, std::fabs(exact)) ? 0.0
                                                          : std::numeric_limits<double>::infinity();
}

/// Worst relative deviation between two tables; sign mismatches on
/// non-negligible entries count as infinite.
double table_deviation(const ConnectionTable& a, const ConnectionTable& ref) {
  double big = -std::numeric_limits<double>::infinity();
  for (const auto& c : ref.coeffs) big = std::max(big, c.log_abs());
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.coeffs.size(); ++i) {
    const SignedLog& x = a.coeffs[i];
    const SignedLog& y = ref.coeffs[i];
    const double floor = big + std::log(1e-20);
    if (y.log_abs() < floor && x.log_abs() < floor) continue;
    if (x.sign() != y.sign()) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::fabs(std::expm1(x.log_abs() - y.log_abs())));
  }
  return worst;
}

class Collector {
 public:
  void add(std::string suite, std::string name, bool ok, double metric, double tol,
           std::string detail = {}) {
    report.checks.push_back(
        {std::move(suite), std::move(name), ok ? "pass" : "fail", metric, tol, std::move(detail)});
  }
  void warn(std::string suite, std::string name, double metric, double tol, std::string detail) {
    report.checks.push_back(
        {std::move(suite), std::move(name), "warning", metric, tol, std::move(detail)});
  }
  /// Runs body; a library error becomes a failed check.
  template <class F>
  void guard(const std::string& suite, const std::string& name, F body) {
    try {
      body();
    } catch (const Error& e) {
      add(suite, name, false, std::numeric_limits<double>::infinity(), 0.0, e.what());
    }
  }
  VerifyReport report;
};

void martingale_and_moments(Collector& out, const ProcessSpec& process, double t1, double t2,
                            std::size_t N, std::uint64_t seed) {
  const std::string fam = to_string(family_for(process.kind));
  const PathSet paths = simulate(process, TimeGrid({0.0, t1, t2}), N, seed, 0x5EED);
  const int K = 4;
  const BasisSpec s1 = basis_for(process, K, t1);
  const BasisSpec s2 = basis_for(process, K, t2);
  const int d = K + 1;

  // Standard errors come from the exact variance of each summand: polynomial
  // products have tails that a sample of 10^6 paths does not resolve, so the
  // sample variance understates them badly at K = 6.
  const auto P1 = moments::psi_polys(s1.with_degree(6));
  const auto P2 = moments::psi_polys(s2.with_degree(6));
  const double n_paths = static_cast<double>(N);
  auto exact_se = [&](const moments::Poly& f, const moments::Poly& g, double mean) {
    const double second =
        moments::expect(process, t1, t2, moments::multiply(f, f), moments::multiply(g, g))
            .convert_to<double>();
    return std::sqrt(std::max(0.0, second - mean * mean) / n_paths);
  };

  // E[psi_2k psi_1l] against the Gram entry at t1.
  out.guard("martingale", fam, [&] {
    const Eigen::MatrixXd g = gram_analytic(s1).entries;
    const Moments m = path_moments(paths, d * d, [&](std::size_t i, std::vector<double>& v) {
      const auto p1 = psi_vector(s1, paths.state(i, 1));
      const auto p2 = psi_vector(s2, paths.state(i, 2));
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) v[k * d + l] = p2[k] * p1[l];
    });
    double worst = 0.0;
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l)
        worst = std::max(worst, zscore(m.mean[k * d + l], exact_se(P1[l], P2[k], g(k, l)), g(k, l)));
    out.add("martingale", fam, worst <= kZ, worst, kZ, "max z over k,l <= 4");
  });

  // Sample Gram at K = 6 against the analytic Gram.
  out.guard("orthogonality", fam, [&] {
    const BasisSpec s = basis_for(process, 6, t1);
    const GramMatrix sample = gram_sample(s, paths, 1);
    const Eigen::MatrixXd exact = gram_analytic(s).entries;
    const moments::Poly one{moments::Real(1)};
    double worst = 0.0;
    for (int r = 0; r <= 6; ++r)
      for (int c = 0; c <= 6; ++c)
        worst = std::max(worst, zscore(sample.entries(r, c),
                                       exact_se(moments::multiply(P1[r], P1[c]), one, exact(r, c)),
                                       exact(r, c)));
    out.add("orthogonality", fam, worst <= kZ, worst, kZ, "max z over K = 6 entries");
  });

  // Fourth moments E[psi_2j^2 psi_1k^2], j, k <= 3.
  out.guard("fourth_moment", fam, [&] {
    const int J = 3;
    const int w = J + 1;
    const Moments m = path_moments(paths, w * w, [&](std::size_t i, std::vector<double>& v) {
      const auto p1 = psi_vector(s1, paths.state(i, 1));
      const auto p2 = psi_vector(s2, paths.state(i, 2));
      for (int j = 0; j < w; ++j)
        for (int k = 0; k < w; ++k) v[j * w + k] = p2[j] * p2[j] * p1[k] * p1[k];
    });
    double worst = 0.0;
    for (int j = 0; j < w; ++j)
      for (int k = 0; k < w; ++k) {
        const double exact = fourth_moment(s1, s2, j, k).to_double();
        const double se = exact_se(moments::multiply(P1[k], P1[k]),
                                   moments::multiply(P2[j], P2[j]), exact);
        worst = std::max(worst, zscore(m.mean[j * w + k], se, exact));
      }
    out.add("fourth_moment", fam, worst <= kZ, worst, kZ, "max z over j,k <= 3");
  });
}

void connection_checks(Collector& out, const ExperimentConfig& config) {
  const double t1 = config.grid[1];
  for (ProcessKind kind : kFamilies) {
    ProcessSpec process = config.process;
    process.kind = kind;
    const std::string fam = to_string(family_for(kind));
    out.guard("connection_identity", fam, [&] {
      double worst = 0.0;
      std::string where = "all k <= 6";
      for (double t : {t1, 1.5})
        for (int k = 0; k <= 6; ++k) {
          const BasisSpec s = basis_for(process, 0, t);
          const double dev = table_deviation(connection_analytic(s, k), connection_oracle(s, k));
          if (dev > worst) {
            worst = dev;
            where = fmt::format("worst at t={} k={}", t, k);
          }
        }
      out.add("connection_identity", fam, worst <= 1e-8, worst, 1e-8, where);
    });
    out.guard("connection_literal", fam, [&] {
      double worst = 0.0;
      for (int k = 1; k <= 4; ++k) {
        const BasisSpec s = basis_for(process, 0, t1);
        worst = std::max(worst, table_deviation(connection_paper_literal(s, k), connection_oracle(s, k)));
      }
      if (worst <= 1e-8)
        out.add("connection_literal", fam, true, worst, 1e-8, "printed prefactors reproduce psi_k^2");
      else
        out.warn("connection_literal", fam, worst, 1e-8,
                 "printed prefactors do not reproduce psi_k^2; corrected forms are used");
    });
  }
}

void gram_checks(Collector& out, const ExperimentConfig& config) {
  const double t1 = config.grid[1];
  for (ProcessKind kind : kFamilies) {
    ProcessSpec process = config.process;
    process.kind = kind;
    const std::string fam = to_string(family_for(kind));
    out.guard("gram_inverse", fam, [&] {
      double worst = 0.0;
      for (int K = 0; K <= 15; ++K) {
        const GramMatrix g = gram_analytic(basis_for(process, K, t1));
        const Eigen::MatrixXd prod = g.entries * gram_inverse(g);
        worst = std::max(worst, (prod - Eigen::MatrixXd::Identity(K + 1, K + 1)).cwiseAbs().maxCoeff());
      }
      out.add("gram_inverse", fam, worst <= 1e-10, worst, 1e-10, "max |Psi Psi^-1 - I|, K <= 15");
    });
  }
  out.guard("gram_inverse", "paper_tridiagonal", [&] {
    double worst = 0.0;
    for (int K = 0; K <= 15; ++K) {
      const GramMatrix g = gram_paper_gamma(K, t1);
      const Eigen::MatrixXd prod = g.entries * gram_inverse(g);
      worst = std::max(worst, (prod - Eigen::MatrixXd::Identity(K + 1, K + 1)).cwiseAbs().maxCoeff());
    }
    out.add("gram_inverse", "paper_tridiagonal", worst <= 1e-10, worst, 1e-10,
            "max |Psi Psi^-1 - I|, K <= 15");
  });
  out.guard("diag_recursion", "paper_tridiagonal", [&] {
    double worst = 0.0;
    for (int K = 1; K <= 10; ++K) {
      const Eigen::MatrixXd inv = gram_inverse(gram_paper_gamma(K, t1));
      const auto e = diag_recursion(K, t1);
      for (int k = 0; k <= K; ++k) worst = std::max(worst, std::fabs(e[k] / inv(k, k) - 1.0));
    }
    out.add("diag_recursion", "paper_tridiagonal", worst <= 1e-8, worst, 1e-8,
            "recursion vs inverse diagonal, K <= 10");
  });

  // Norm sums written out term by term.
  out.guard("closed_norms", "closed_sums", [&] {
    const double q = config.process.q;
    double worst = 0.0;
    for (int K = 0; K <= 12; ++K) {
      long double pc = 0, pci = 0, pa = 0, pai = 0, mx = 0, mxi = 0;
      long double fact = 1, poch = 1, tk = 1;
      for (int k = 0; k <= K; ++k) {
        if (k > 0) {
          fact *= k;
          poch *= t1 + k - 1;
          tk *= t1;
        }
        const long double charl = tk * fact;
        const long double pasc = std::pow((long double)q, -k) * fact * poch;
        const long double mp = std::exp(std::lgamma((long double)k + 2 * t1) - std::lgamma(2.0L * t1)) / fact;
        pc += charl * charl;
        pci += 1 / (charl * charl);
        pa += pasc * pasc;
        pai += 1 / (pasc * pasc);
        mx += mp * mp;
        mxi += 1 / (mp * mp);
      }
      ProcessSpec pr = config.process;
      auto rel = [&](ProcessKind kind, bool inverse, long double want) {
        pr.kind = kind;
        const double got = gram_norm_sq_log(basis_for(pr, K, t1), inverse).to_double();
        return std::fabs(got / static_cast<double>(want) - 1.0);
      };
      worst = std::max({worst, rel(ProcessKind::Poisson, false, pc), rel(ProcessKind::Poisson, true, pci),
                        rel(ProcessKind::Pascal, false, pa), rel(ProcessKind::Pascal, true, pai),
                        rel(ProcessKind::Meixner, false, mx), rel(ProcessKind::Meixner, true, mxi)});
    }
    out.add("closed_norms", "closed_sums", worst <= 1e-12, worst, 1e-12,
            "Poisson, Pascal, Meixner norms, K <= 12");
  });
}

void regime_checks(Collector& out) {
  struct Case {
    int K;
    double N;
    double eps;
    Verdict want;
  };
  const Case cases[] = {{2, 16777216.0, 2.0, Verdict::Converge},
                        {4, 1e6, 1.0, Verdict::Diverge},
                        {3, 1e6, 1.0, Verdict::Indeterminate}};
  bool ok = true;
  for (const auto& c : cases) ok = ok && regime(c.K, c.N, ProcessKind::Poisson, c.eps).verdict == c.want;
  const std::pair<double, double> uv[] = {{10, 4}, {8, 8}, {11, 7}, {8, 8}};
  for (std::size_t i = 0; i < 4; ++i) ok = ok && regime_exponents(kFamilies[i]) == uv[i];
  out.add("regime", "thresholds", ok, ok ? 0.0 : 1.0, 0.0, "Poisson examples and (u,v) table");
}

}  // namespace

bool VerifyReport::passed() const { return failures() == 0; }

std::size_t VerifyReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [](const auto& c) { return c.status == "fail"; }));
}

VerifyReport run_verify(const ExperimentConfig& config, const VerifyOptions& options) {
  config.validate();
  const bool previous = connection_fault();
  set_connection_fault(options.inject_connection_fault);
  Collector out;
  try {
    const double t1 = config.grid[1];
    const double t2 = config.grid[2];
    for (ProcessKind kind : kFamilies) {
      ProcessSpec process = config.process;
      process.kind = kind;
      martingale_and_moments(out, process, t1, t2, options.paths, config.seed);
    }
    connection_checks(out, config);
    gram_checks(out, config);
    regime_checks(out);

    out.guard("gamma_gram", "paper_vs_sample", [&] {
      const GammaGramFinding f = gamma_gram_finding(4, t1, options.paths, config.seed);
      out.add("gamma_gram", "direct_vs_sample", f.direct_agrees, f.max_z_direct, kZ, f.summary);
      if (f.paper_agrees)
        out.add("gamma_gram", "paper_vs_sample", true, f.max_z_paper, kZ, f.summary);
      else
        out.warn("gamma_gram", "paper_vs_sample", f.max_z_paper, kZ, f.summary);
    });
  } catch (...) {
    set_connection_fault(previous);
    throw;
  }
  set_connection_fault(previous);
  return out.report;
}

json verify_json(const ExperimentConfig& config, const VerifyReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks)
    checks.push_back(json{{"suite", c.suite},
                          {"name", c.name},
                          {"status", c.status},
                          {"metric", std::isfinite(c.metric) ? json(c.metric) : json(nullptr)},
                          {"tolerance", c.tolerance},
                          {"detail", c.detail}});
  std::size_t warnings = static_cast<std::size_t>(std::count_if(
      report.checks.begin(), report.checks.end(), [](const auto& c) { return c.status == "warning"; }));
  return json{{"schema_version", kSchemaVersion},
              {"command", "verify"},
              {"config", config.to_json()},
              {"passed", report.passed()},
              {"failures", report.failures()},
              {"warnings", warnings},
              {"checks", checks}};
}

}  // namespace lsmc
