#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lsmc/gram.hpp"
#include "lsmc/levy_processes.hpp"
#include "lsmc/lsm_engine.hpp"

namespace lsmc {

inline constexpr int kSchemaVersion = 1;
/// CSV sweep files carry diag_mse_0 .. diag_mse_{kCsvMaxK}.
inline constexpr int kCsvMaxK = 15;

enum class OutputFormat { Csv, Json };

struct ExperimentConfig {
  ProcessSpec process{ProcessKind::Poisson};
  std::vector<double> grid{0.0, 1.0, 2.0};
  std::vector<int> K{1, 2, 3};
  std::vector<std::size_t> N{1000, 10000};
  std::size_t R = 200;
  double epsilon = 0.5;
  std::uint64_t seed = 20240101;
  OutputFormat format = OutputFormat::Csv;
  GramMode gram_mode = GramMode::Analytic;
  PathMode path_mode = PathMode::Fresh;
  /// Record wall-clock runtime_ms in sweep rows; off by default so reruns
  /// are byte-identical.
  bool timing = false;

  /// Throws InvalidSpec on empty lists or out-of-range parameters.
  void validate() const;
  nlohmann::json to_json() const;
};

OutputFormat parse_format(const std::string& name);

struct SweepRow {
  std::string process;
  std::string family;
  double t1 = 0.0;
  double t2 = 0.0;
  int K = 0;
  std::size_t N = 0;
  std::size_t R = 0;
  std::uint64_t seed = 0;
  double sup_mse = 0.0;
  double sup_mse_stderr = 0.0;
  std::vector<double> diag_mse;
  double upper_bound_log10 = 0.0;
  double lower_bound_log10 = 0.0;
  std::string regime;
  double runtime_ms = 0.0;
  /// "ok", or the error that stopped this cell.
  std::string status = "ok";
};

/// Runs single_period_error_matrix for every (K, N) cell at (t_1, t_2) =
/// (grid[1], grid[2]); rows sorted by (K, N). Cell failures are recorded in
/// the row's status and the sweep continues.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config);

std::vector<std::string> sweep_csv_header();
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
nlohmann::json sweep_json(const ExperimentConfig& config, const std::vector<SweepRow>& rows);
/// Reads rows written by write_sweep_csv or sweep_json.
std::vector<SweepRow> read_sweep(std::istream& in);

struct BoundsRow {
  std::string family;
  double t1 = 0.0;
  double t2 = 0.0;
  int K = 0;
  std::size_t N = 0;
  double upper = 0.0;
  double lower = 0.0;
  double log10_upper = 0.0;
  double log10_lower = 0.0;
  std::string regime;
  double u = 0.0;
  double v = 0.0;
  double epsilon = 0.0;
};

std::vector<BoundsRow> run_bounds(const ExperimentConfig& config);
void write_bounds_csv(std::ostream& out, const std::vector<BoundsRow>& rows);
nlohmann::json bounds_json(const ExperimentConfig& config, const std::vector<BoundsRow>& rows);

/// Payoff description: "zero", "never", "constant:c", "put:strike",
/// "call:strike" or "basis:a0,a1,...".
Payoff parse_payoff(const std::string& text);

struct PriceRequest {
  /// h_m.
  Payoff terminal = Payoff::zero();
  /// h_n for n < m.
  Payoff early = Payoff::zero();
};

nlohmann::json run_price(const ExperimentConfig& config, const PriceRequest& request);

enum class GramSource { Analytic, Paper, Sample };
GramSource parse_gram_source(const std::string& name);
/// Gram at t = grid[1] and degree K[0].
GramMatrix run_gram(const ExperimentConfig& config, GramSource source);
void write_gram_csv(std::ostream& out, const GramMatrix& g);
nlohmann::json gram_json(const ExperimentConfig& config, const GramMatrix& g);

struct RateFitPoint {
  std::size_t N = 0;
  /// Largest K with sup_mse <= target, interpolated in log sup_mse toward K+1.
  double K_star = 0.0;
};

struct RateModel {
  std::string name;
  double coefficient = 0.0;
  double rss = 0.0;
};

struct RateFit {
  double target = 0.0;
  std::vector<RateFitPoint> points;
  /// K* = a log N / log log N and K* = b log N (natural logs), least squares
  /// through the origin.
  RateModel loglog;
  RateModel log;
  std::string preferred;
};

/// InputError unless at least three N values have a defined K*.
RateFit rate_fit(const std::vector<SweepRow>& rows, double target);
nlohmann::json rate_fit_json(const RateFit& fit);

struct VerifyCheck {
  std::string suite;
  std::string name;
  /// "pass", "fail" or "warning".
  std::string status;
  double metric = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool passed() const;
  std::size_t failures() const;
};

struct VerifyOptions {
  std::size_t paths = 100000;
  /// Sign flip in the connection coefficients; verify must then fail.
  bool inject_connection_fault = false;
};

VerifyReport run_verify(const ExperimentConfig& config, const VerifyOptions& options);
nlohmann::json verify_json(const ExperimentConfig& config, const VerifyReport& report);

}  // namespace lsmc
