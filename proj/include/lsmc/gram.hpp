#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lsmc/levy_processes.hpp"
#include "lsmc/meixner_basis.hpp"
#include "lsmc/signed_log.hpp"

namespace lsmc {

enum class GramProvenance { Analytic, PaperTridiagonal, Sample };
std::string to_string(GramProvenance p);

struct SampleMeta {
  std::size_t N = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd stderr_;
  /// N < K+1: the sample matrix cannot be positive definite.
  bool rank_deficient = false;
};

/// Psi_n = E[psi_n psi_n^T] for a basis at time t_n.
struct GramMatrix {
  BasisSpec spec;
  Eigen::MatrixXd entries;
  GramProvenance provenance = GramProvenance::Analytic;
  std::optional<SampleMeta> sample;

  int size() const { return static_cast<int>(entries.rows()); }
  /// All off-diagonal entries exactly zero.
  bool is_diagonal() const;
};

/// Exact Gram. Diagonal closed forms for Charlier (t^k k!), Meixner
/// (q^-k k! (t)_k), Meixner-Pollaczek (Gamma(k+2t) / (Gamma(2t) k!)) and
/// Hermite (k! t^k). Laguerre is integrated against the Gamma(t) law with
/// 50-digit Gauss-Laguerre quadrature; PrecisionError if two node counts
/// disagree.
GramMatrix gram_analytic(const BasisSpec& spec);

/// E[psi_k psi_l] in log space for any degrees, without building a matrix.
/// Orthogonal families give zero off the diagonal.
SignedLog gram_entry_log(const BasisSpec& spec, int k, int l);

/// Tridiagonal Laguerre matrix as printed in the source article:
/// diagonal (2k+t)/(k+t) binom(k+t,k), off-diagonal -binom(k+t,k) at
/// (k,k+1) and (k+1,k). It is the Gram of L^{(t-1)} under Gamma(t+1).
GramMatrix gram_paper_gamma(int K, double t);

/// (1/N) sum_i psi_n(S_i) psi_n(S_i)^T at exercise index n >= 1, with
/// per-entry standard errors.
GramMatrix gram_sample(const BasisSpec& spec, const PathSet& paths, std::size_t n);

/// Inverse; entrywise for diagonal matrices, Cholesky otherwise.
/// DecompositionError if the matrix is not symmetric positive definite.
Eigen::MatrixXd gram_inverse(const GramMatrix& g);

/// Diagonal e_0..e_K of gram_paper_gamma(K, t)^{-1} by backward recursion
/// from e_KK = K / ((K+t) binom(K+t-1, K-1)), with e_{K+1} = 0. K >= 1.
std::vector<double> diag_recursion(int K, double t);

/// Generalized binomial Gamma(a+1) / (Gamma(k+1) Gamma(a-k+1)).
double binom_real(double a, int k);

/// Frobenius norm with compensated accumulation.
double frobenius(const Eigen::MatrixXd& m);
/// Squared Frobenius norm of a matrix given entrywise in log space.
SignedLog frobenius_sq_log(const std::vector<SignedLog>& entries);
/// ||Psi||^2 or ||Psi^{-1}||^2 of the analytic Gram in log space; for the
/// diagonal families this never overflows.
SignedLog gram_norm_sq_log(const BasisSpec& spec, bool inverse);

/// Comparison of the printed tridiagonal Laguerre Gram and the
/// direct-expectation Gram against a simulated sample Gram.
struct GammaGramFinding {
  int K = 0;
  double t = 0.0;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd paper;
  Eigen::MatrixXd direct;
  Eigen::MatrixXd sample;
  /// Exact standard error of each sample entry under the Gamma(t) law.
  Eigen::MatrixXd stderr_;
  /// max_entries |candidate - sample| / stderr.
  double max_z_paper = 0.0;
  double max_z_direct = 0.0;
  bool paper_agrees = false;
  bool direct_agrees = false;
  std::string summary;
};

GammaGramFinding gamma_gram_finding(int K, double t, std::size_t N, std::uint64_t seed);

}  // namespace lsmc
