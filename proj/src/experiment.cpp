#include "lsmc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "lsmc/bounds.hpp"
#include "lsmc/errors.hpp"

namespace lsmc {

namespace {

using nlohmann::json;

/// Shortest round-trip text; stable across runs and platforms.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

/// JSON has no inf/nan; they become null.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double parse_num(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw InputError("malformed number '" + s + "'");
  return v;
}

double jget(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <class T>
std::vector<T> sorted_unique(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

json header(const char* command, const ExperimentConfig& config) {
  return json{{"schema_version", kSchemaVersion}, {"command", command}, {"config", config.to_json()}};
}

}  // namespace

void ExperimentConfig::validate() const {
  process.validate();
  if (grid.size() < 3) throw InvalidSpec("grid needs at least t_0, t_1, t_2");
  TimeGrid check(grid);
  if (K.empty() || N.empty()) throw InvalidSpec("K and N lists must be nonempty");
  for (int k : K)
    if (k < 0 || k > 40) throw InvalidSpec("K values must lie in 0..40");
  for (std::size_t n : N)
    if (n == 0) throw InvalidSpec("N values must be positive");
  if (R == 0) throw InvalidSpec("replications must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidSpec("epsilon must be positive");
}

json ExperimentConfig::to_json() const {
  return json{{"process", to_string(process.kind)},
              {"q", process.q},
              {"zeta", process.zeta},
              {"grid", grid},
              {"K", K},
              {"N", N},
              {"reps", R},
              {"epsilon", epsilon},
              {"seed", seed},
              {"format", format == OutputFormat::Csv ? "csv" : "json"},
              {"gram_mode", to_string(gram_mode)},
              {"path_mode", to_string(path_mode)},
              {"timing", timing}};
}

OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  throw InvalidSpec("unknown format '" + name + "'");
}

// ---- sweep ----------------------------------------------------------------

std::vector<SweepRow> run_sweep(const ExperimentConfig& config) {
  config.validate();
  const double t1 = config.grid[1];
  const double t2 = config.grid[2];
  std::vector<SweepRow> rows;
  for (int K : sorted_unique(config.K)) {
    for (std::size_t N : sorted_unique(config.N)) {
      SweepRow row;
      row.process = to_string(config.process.kind);
      row.family = to_string(family_for(config.process.kind));
      row.t1 = t1;
      row.t2 = t2;
      row.K = K;
      row.N = N;
      row.R = config.R;
      row.seed = config.seed;
      const auto start = std::chrono::steady_clock::now();
      try {
        const MseReport rep =
            single_period_error_matrix(basis_for(config.process, K, t1),
                                       basis_for(config.process, K, t2), N, config.R, config.seed,
                                       config.epsilon);
        row.sup_mse = rep.sup_mse;
        row.sup_mse_stderr = rep.sup_mse_stderr;
        row.diag_mse.assign(rep.diag_mse.data(), rep.diag_mse.data() + rep.diag_mse.size());
        row.upper_bound_log10 = rep.bound_upper.log10();
        row.lower_bound_log10 = rep.bound_lower.log10();
        row.regime = rep.regime ? to_string(rep.regime->verdict) : "n/a";
      } catch (const Error& e) {
        row.sup_mse = row.sup_mse_stderr = std::numeric_limits<double>::quiet_NaN();
        row.upper_bound_log10 = row.lower_bound_log10 = std::numeric_limits<double>::quiet_NaN();
        row.regime = "n/a";
        row.status = e.what();
      }
      if (config.timing)
        row.runtime_ms = std::round(std::chrono::duration<double, std::milli>(
                                        std::chrono::steady_clock::now() - start)
                                        .count());
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<std::string> sweep_csv_header() {
  std::vector<std::string> h{"process", "family", "t1",  "t2",      "K",
                             "N",       "R",      "seed", "sup_mse", "sup_mse_stderr"};
  for (int k = 0; k <= kCsvMaxK; ++k) h.push_back(fmt::format("diag_mse_{}", k));
  for (const char* s : {"upper_bound_log10", "lower_bound_log10", "regime", "runtime_ms", "status"})
    h.emplace_back(s);
  return h;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << fmt::format("{}\n", fmt::join(sweep_csv_header(), ","));
  for (const auto& r : rows) {
    std::vector<std::string> cells{r.process, r.family,       num(r.t1),          num(r.t2),
                                   fmt::format("{}", r.K), fmt::format("{}", r.N),
                                   fmt::format("{}", r.R), fmt::format("{}", r.seed),
                                   num(r.sup_mse),        num(r.sup_mse_stderr)};
    for (int k = 0; k <= kCsvMaxK; ++k)
      cells.push_back(k < static_cast<int>(r.diag_mse.size()) ? num(r.diag_mse[k]) : "");
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    for (const std::string& s : {num(r.upper_bound_log10), num(r.lower_bound_log10), r.regime,
                                 num(r.runtime_ms), status})
      cells.push_back(s);
    out << fmt::format("{}\n", fmt::join(cells, ","));
  }
}

json sweep_json(const ExperimentConfig& config, const std::vector<SweepRow>& rows) {
  json j = header("sweep", config);
  json arr = json::array();
  for (const auto& r : rows) {
    json d = json::array();
    for (double v : r.diag_mse) d.push_back(jnum(v));
    arr.push_back(json{{"process", r.process},
                       {"family", r.family},
                       {"t1", r.t1},
                       {"t2", r.t2},
                       {"K", r.K},
                       {"N", r.N},
                       {"R", r.R},
                       {"seed", r.seed},
                       {"sup_mse", jnum(r.sup_mse)},
                       {"sup_mse_stderr", jnum(r.sup_mse_stderr)},
                       {"diag_mse", d},
                       {"upper_bound_log10", jnum(r.upper_bound_log10)},
                       {"lower_bound_log10", jnum(r.lower_bound_log10)},
                       {"regime", r.regime},
                       {"runtime_ms", r.runtime_ms},
                       {"status", r.status}});
  }
  j["rows"] = std::move(arr);
  return j;
}

std::vector<SweepRow> read_sweep(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<SweepRow> rows;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw InputError("sweep input is empty");

  if (text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw InputError(std::string("sweep JSON: ") + e.what());
    }
    for (const auto& r : j.at("rows")) {
      SweepRow row;
      row.process = r.at("process");
      row.family = r.at("family");
      row.t1 = r.at("t1");
      row.t2 = r.at("t2");
      row.K = r.at("K");
      row.N = r.at("N");
      row.R = r.at("R");
      row.seed = r.at("seed");
      row.sup_mse = jget(r.at("sup_mse"));
      row.sup_mse_stderr = jget(r.at("sup_mse_stderr"));
      for (const auto& d : r.at("diag_mse")) row.diag_mse.push_back(jget(d));
      row.upper_bound_log10 = jget(r.at("upper_bound_log10"));
      row.lower_bound_log10 = jget(r.at("lower_bound_log10"));
      row.regime = r.at("regime");
      row.runtime_ms = r.at("runtime_ms");
      row.status = r.at("status");
      rows.push_back(std::move(row));
    }
    return rows;
  }

  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  const auto head = split(line, ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < head.size(); ++i) col[head[i]] = i;
  for (const char* need : {"K", "N", "sup_mse"})
    if (!col.contains(need)) throw InputError(std::string("sweep CSV lacks column ") + need);
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != head.size()) throw InputError("sweep CSV row has wrong column count");
    auto cell = [&](const std::string& name) -> std::string {
      auto it = col.find(name);
      return it == col.end() ? std::string() : cells[it->second];
    };
    SweepRow row;
    row.process = cell("process");
    row.family = cell("family");
    row.t1 = parse_num(cell("t1"));
    row.t2 = parse_num(cell("t2"));
    row.K = static_cast<int>(parse_num(cell("K")));
    row.N = static_cast<std::size_t>(parse_num(cell("N")));
    row.R = col.contains("R") ? static_cast<std::size_t>(parse_num(cell("R"))) : 0;
    row.sup_mse = parse_num(cell("sup_mse"));
    row.sup_mse_stderr = parse_num(cell("sup_mse_stderr"));
    for (int k = 0; k <= row.K && k <= kCsvMaxK; ++k)
      row.diag_mse.push_back(parse_num(cell(fmt::format("diag_mse_{}", k))));
    row.upper_bound_log10 = parse_num(cell("upper_bound_log10"));
    row.lower_bound_log10 = parse_num(cell("lower_bound_log10"));
    row.regime = cell("regime");
    row.status = col.contains("status") ? cell("status") : "ok";
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- bounds ---------------------------------------------------------------

std::vector<BoundsRow> run_bounds(const ExperimentConfig& config) {
  config.validate();
  const double t1 = config.grid[1];
  const double t2 = config.grid[2];
  std::vector<BoundsRow> rows;
  for (int K : sorted_unique(config.K)) {
    const BasisSpec s1 = basis_for(config.process, K, t1);
    const BasisSpec s2 = basis_for(config.process, K, t2);
    for (std::size_t N : sorted_unique(config.N)) {
      const double n = static_cast<double>(N);
      const BoundValue up = upper_bound(K, n, s1, s2);
      const BoundValue lo = lower_bound(K, n, s1, s2);
      BoundsRow row{to_string(s1.family), t1, t2, K, N, up.to_double(), lo.to_double(),
                    up.log10(), lo.log10(), "n/a", 0.0, 0.0, config.epsilon};
      if (config.process.kind != ProcessKind::Brownian) {
        const RegimeVerdict v = regime(K, n, config.process.kind, config.epsilon);
        row.regime = to_string(v.verdict);
        row.u = v.u;
        row.v = v.v;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_bounds_csv(std::ostream& out, const std::vector<BoundsRow>& rows) {
  out << "family,t1,t2,K,N,upper,lower,log10_upper,log10_lower,regime,u,v,epsilon\n";
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.family, num(r.t1), num(r.t2),
                       r.K, r.N, num(r.upper), num(r.lower), num(r.log10_upper),
                       num(r.log10_lower), r.regime, num(r.u), num(r.v), num(r.epsilon));
}

json bounds_json(const ExperimentConfig& config, const std::vector<BoundsRow>& rows) {
  json j = header("bounds", config);
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back(json{{"family", r.family},
                       {"t1", r.t1},
                       {"t2", r.t2},
                       {"K", r.K},
                       {"N", r.N},
                       {"upper", jnum(r.upper)},
                       {"lower", jnum(r.lower)},
                       {"log10_upper", jnum(r.log10_upper)},
                       {"log10_lower", jnum(r.log10_lower)},
                       {"regime", r.regime},
                       {"u", r.u},
                       {"v", r.v},
                       {"epsilon", r.epsilon}});
  j["rows"] = std::move(arr);
  return j;
}

// ---- price ----------------------------------------------------------------

Payoff parse_payoff(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto need_arg = [&] {
    if (arg.empty()) throw InvalidSpec("payoff '" + kind + "' needs an argument");
    return parse_num(arg);
  };
  try {
    if (kind == "zero") return Payoff::zero();
    if (kind == "never") return Payoff::never();
    if (kind == "constant") return Payoff::constant(need_arg());
    if (kind == "put") return Payoff::put(need_arg());
    if (kind == "call") return Payoff::call(need_arg());
    if (kind == "basis") {
      std::vector<double> a;
      for (const auto& s : split(arg, ',')) a.push_back(parse_num(s));
      if (a.empty()) throw InvalidSpec("basis payoff needs coefficients");
      return Payoff::basis_combination(std::move(a));
    }
  } catch (const std::invalid_argument&) {
    throw InvalidSpec("malformed payoff '" + text + "'");
  } catch (const InputError& e) {
    throw InvalidSpec(e.what());
  }
  throw InvalidSpec("unknown payoff '" + text + "'");
}

json run_price(const ExperimentConfig& config, const PriceRequest& request) {
  config.validate();
  const TimeGrid grid(config.grid);
  const int K = config.K.front();
  const std::size_t N = config.N.front();
  PayoffSpec payoff;
  for (std::size_t n = 0; n < grid.m(); ++n) payoff.h.push_back(request.early);
  payoff.h.push_back(request.terminal);
  PriceOptions opts;
  opts.paths = config.path_mode;
  opts.gram = config.gram_mode;
  const PriceResult res = lsm_price(config.process, grid, payoff, K, N, config.seed, opts);

  json j = header("price", config);
  j["K"] = K;
  j["N"] = N;
  j["V0"] = jnum(res.V0);
  j["C0"] = jnum(res.C0);
  j["C0_stderr"] = jnum(res.C0_stderr);
  json steps = json::array();
  for (const auto& s : res.steps) {
    steps.push_back(json{{"n", s.n},
                         {"t", grid[s.n]},
                         {"beta_hat", std::vector<double>(s.beta_hat.begin(), s.beta_hat.end())},
                         {"gamma_hat", std::vector<double>(s.gamma_hat.begin(), s.gamma_hat.end())}});
  }
  j["steps"] = std::move(steps);
  return j;
}

// ---- gram -----------------------------------------------------------------

GramSource parse_gram_source(const std::string& name) {
  if (name == "analytic") return GramSource::Analytic;
  if (name == "paper") return GramSource::Paper;
  if (name == "sample") return GramSource::Sample;
  throw InvalidSpec("unknown Gram source '" + name + "'");
}

GramMatrix run_gram(const ExperimentConfig& config, GramSource source) {
  config.validate();
  const int K = config.K.front();
  const double t = config.grid[1];
  switch (source) {
    case GramSource::Analytic:
      return gram_analytic(basis_for(config.process, K, t));
    case GramSource::Paper:
      if (config.process.kind != ProcessKind::Gamma)
        throw InvalidSpec("the tridiagonal Gram exists only for the Gamma process");
      return gram_paper_gamma(K, t);
    case GramSource::Sample: {
      const PathSet paths = simulate(config.process, TimeGrid(config.grid), config.N.front(),
                                     config.seed, 0);
      return gram_sample(basis_for(config.process, K, t), paths, 1);
    }
  }
  throw InvalidSpec("unknown Gram source");
}

void write_gram_csv(std::ostream& out, const GramMatrix& g) {
  for (Eigen::Index r = 0; r < g.entries.rows(); ++r) {
    std::vector<std::string> cells;
    for (Eigen::Index c = 0; c < g.entries.cols(); ++c) cells.push_back(num(g.entries(r, c)));
    out << fmt::format("{}\n", fmt::join(cells, ","));
  }
}

json gram_json(const ExperimentConfig& config, const GramMatrix& g) {
  json j = header("gram", config);
  auto rows_of = [](const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(jnum(m(r, c)));
      a.push_back(row);
    }
    return a;
  };
  j["family"] = to_string(g.spec.family);
  j["t"] = g.spec.t;
  j["K"] = g.spec.K;
  j["provenance"] = to_string(g.provenance);
  j["entries"] = rows_of(g.entries);
  if (g.sample) {
    j["sample"] = json{{"N", g.sample->N},
                       {"seed", g.sample->seed},
                       {"rank_deficient", g.sample->rank_deficient},
                       {"stderr", rows_of(g.sample->stderr_)}};
  }
  return j;
}

// ---- rate fit -------------------------------------------------------------

RateFit rate_fit(const std::vector<SweepRow>& rows, double target) {
  if (!(target > 0.0)) throw InputError("rate-fit: target must be positive");
  std::map<std::size_t, std::map<int, double>> by_n;
  for (const auto& r : rows)
    if (r.status == "ok" && std::isfinite(r.sup_mse)) by_n[r.N][r.K] = r.sup_mse;

  RateFit fit;
  fit.target = target;
  for (const auto& [N, ks] : by_n) {
    if (N < 16) continue;  // log log N must be clearly positive
    std::optional<int> best;
    for (const auto& [K, mse] : ks)
      if (mse <= target) best = std::max(best.value_or(K), K);
    if (!best) continue;
    double k_star = *best;
    const auto next = ks.upper_bound(*best);
    const double lo = ks.at(*best);
    if (next != ks.end() && lo > 0.0 && next->second > target)
      k_star += (std::log(target) - std::log(lo)) / (std::log(next->second) - std::log(lo)) *
                (next->first - *best);
    fit.points.push_back({N, k_star});
  }
  if (fit.points.size() < 3)
    throw InputError("rate-fit: need at least three N values with a defined K* (got " +
                     std::to_string(fit.points.size()) + ")");

  auto fit_model = [&](const char* name, auto feature) {
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : fit.points) {
      const double x = feature(static_cast<double>(p.N));
      sxy += x * p.K_star;
      sxx += x * x;
    }
    RateModel m{name, sxy / sxx, 0.0};
    for (const auto& p : fit.points) {
      const double e = p.K_star - m.coefficient * feature(static_cast<double>(p.N));
      m.rss += e * e;
    }
    return m;
  };
  fit.loglog = fit_model("log_over_loglog", [](double n) { return std::log(n) / std::log(std::log(n)); });
  fit.log = fit_model("log", [](double n) { return std::log(n); });
  fit.preferred = fit.loglog.rss <= fit.log.rss ? fit.loglog.name : fit.log.name;
  return fit;
}

json rate_fit_json(const RateFit& fit) {
  json pts = json::array();
  for (const auto& p : fit.points) pts.push_back(json{{"N", p.N}, {"K_star", p.K_star}});
  auto model = [](const RateModel& m) {
    return json{{"name", m.name}, {"coefficient", jnum(m.coefficient)}, {"rss", jnum(m.rss)}};
  };
  return json{{"schema_version", kSchemaVersion},
              {"command", "rate-fit"},
              {"target_mse", fit.target},
              {"points", pts},
              {"models", json::array({model(fit.loglog), model(fit.log)})},
              {"preferred", fit.preferred}};
}

}  // namespace lsmc
