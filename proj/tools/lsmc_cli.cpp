// lsmc: command-line front end for the regression-error experiments.
//
// Exit codes: 0 success, 1 verification failure, 2 invalid config,
// 3 numerical failure.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "lsmc/errors.hpp"
#include "lsmc/experiment.hpp"
#include "lsmc/parallel.hpp"

namespace {

using lsmc::ExperimentConfig;

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Flat `key = value` lines; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw lsmc::InvalidSpec("cannot open config file '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw lsmc::InvalidSpec(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw lsmc::InvalidSpec(key + ": malformed number '" + s + "'");
  return v;
}

std::uint64_t to_count(const std::string& key, const std::string& s) {
  const double v = to_double(key, s);
  if (v < 0 || v != std::floor(v) || v > 1e18)
    throw lsmc::InvalidSpec(key + ": expected a nonnegative integer, got '" + s + "'");
  return static_cast<std::uint64_t>(v);
}

/// Raw option text from flags and config file; flags win.
struct Settings {
  std::map<std::string, std::string> values;

  bool has(const std::string& k) const { return values.count(k) != 0; }
  const std::string& get(const std::string& k) const { return values.at(k); }
};

ExperimentConfig build_config(const Settings& s) {
  ExperimentConfig c;
  if (s.has("process")) c.process.kind = lsmc::parse_process_kind(s.get("process"));
  if (s.has("q")) c.process.q = to_double("q", s.get("q"));
  if (s.has("zeta")) c.process.zeta = to_double("zeta", s.get("zeta"));
  if (s.has("grid")) {
    c.grid.clear();
    for (const auto& v : split_list(s.get("grid"))) c.grid.push_back(to_double("grid", v));
  }
  if (s.has("K")) {
    c.K.clear();
    for (const auto& v : split_list(s.get("K")))
      c.K.push_back(static_cast<int>(std::min<std::uint64_t>(to_count("K", v), 1000)));
  }
  if (s.has("N")) {
    c.N.clear();
    for (const auto& v : split_list(s.get("N"))) c.N.push_back(to_count("N", v));
  }
  if (s.has("reps")) c.R = to_count("reps", s.get("reps"));
  if (s.has("epsilon")) c.epsilon = to_double("epsilon", s.get("epsilon"));
  if (s.has("seed")) c.seed = to_count("seed", s.get("seed"));
  if (s.has("format")) c.format = lsmc::parse_format(s.get("format"));
  if (s.has("gram-mode")) {
    const std::string& m = s.get("gram-mode");
    if (m == "analytic") c.gram_mode = lsmc::GramMode::Analytic;
    else if (m == "sample") c.gram_mode = lsmc::GramMode::Sample;
    else throw lsmc::InvalidSpec("unknown gram-mode '" + m + "'");
  }
  if (s.has("path-mode")) {
    const std::string& m = s.get("path-mode");
    if (m == "fresh") c.path_mode = lsmc::PathMode::Fresh;
    else if (m == "shared") c.path_mode = lsmc::PathMode::Shared;
    else throw lsmc::InvalidSpec("unknown path-mode '" + m + "'");
  }
  if (s.has("timing")) c.timing = s.get("timing") == "true" || s.get("timing") == "1";
  c.validate();
  return c;
}

void emit(const Settings& s, const std::string& text) {
  if (s.has("out") && s.get("out") != "-") {
    std::ofstream out(s.get("out"), std::ios::binary);
    if (!out) throw lsmc::InvalidSpec("cannot write '" + s.get("out") + "'");
    out << text;
    return;
  }
  std::cout << text;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

int run(const std::string& command, const Settings& s) {
  if (s.has("threads")) lsmc::set_thread_count(static_cast<int>(to_count("threads", s.get("threads"))));

  if (command == "rate-fit") {
    if (!s.has("input")) throw lsmc::InvalidSpec("rate-fit needs --input");
    if (!s.has("target")) throw lsmc::InvalidSpec("rate-fit needs --target");
    std::ifstream in(s.get("input"));
    if (!in) throw lsmc::InputError("cannot open '" + s.get("input") + "'");
    const auto rows = lsmc::read_sweep(in);
    emit(s, dump(lsmc::rate_fit_json(lsmc::rate_fit(rows, to_double("target", s.get("target"))))));
    return kExitOk;
  }

  const ExperimentConfig config = build_config(s);
  const bool csv = config.format == lsmc::OutputFormat::Csv;
  std::ostringstream out;

  if (command == "verify") {
    lsmc::VerifyOptions opts;
    if (s.has("paths")) opts.paths = to_count("paths", s.get("paths"));
    opts.inject_connection_fault = s.has("inject-fault");
    const auto report = lsmc::run_verify(config, opts);
    emit(s, dump(lsmc::verify_json(config, report)));
    for (const auto& c : report.checks)
      if (c.status == "fail")
        std::cerr << "FAIL " << c.suite << "/" << c.name << ": " << c.detail << "\n";
    return report.passed() ? kExitOk : kExitVerify;
  }
  if (command == "sweep") {
    const auto rows = lsmc::run_sweep(config);
    if (csv) lsmc::write_sweep_csv(out, rows);
    else out << dump(lsmc::sweep_json(config, rows));
  } else if (command == "bounds") {
    const auto rows = lsmc::run_bounds(config);
    if (csv) lsmc::write_bounds_csv(out, rows);
    else out << dump(lsmc::bounds_json(config, rows));
  } else if (command == "price") {
    lsmc::PriceRequest req;
    if (s.has("payoff")) req.terminal = lsmc::parse_payoff(s.get("payoff"));
    if (s.has("early")) req.early = lsmc::parse_payoff(s.get("early"));
    out << dump(lsmc::run_price(config, req));
  } else if (command == "gram") {
    const auto source = lsmc::parse_gram_source(s.has("source") ? s.get("source") : "analytic");
    const auto g = lsmc::run_gram(config, source);
    if (csv) lsmc::write_gram_csv(out, g);
    else out << dump(lsmc::gram_json(config, g));
  }
  emit(s, out.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Least-squares Monte Carlo regression-error experiments"};
  app.require_subcommand(1, 1);

  std::map<std::string, std::string> flags;
  std::string config_path;
  auto add_common = [&](CLI::App* sub) {
    static const std::pair<const char*, const char*> common[] = {
        {"process", "poisson | gamma | pascal | meixner | brownian"},
        {"q", "Pascal parameter in (0, 1)"},
        {"zeta", "Meixner parameter in (0, pi)"},
        {"grid", "exercise times t_0,t_1,..., starting at 0"},
        {"K", "basis degrees, comma separated"},
        {"N", "path counts, comma separated"},
        {"reps", "replications per cell"},
        {"epsilon", "regime margin"},
        {"seed", "root seed"},
        {"out", "output file (default stdout)"},
        {"format", "csv | json"},
        {"threads", "worker threads"},
        {"gram-mode", "analytic | sample"},
        {"path-mode", "fresh | shared"}};
    for (const auto& [name, help] : common)
      sub->add_option(std::string("--") + name, flags[name], help);
    sub->add_option("--config", config_path, "flat key = value file; flags override it");
    sub->add_flag("--timing", [&](std::int64_t) { flags["timing"] = "true"; },
                  "record runtime_ms (breaks byte-identical reruns)");
  };

  auto* verify = app.add_subcommand("verify", "run the invariant suites");
  add_common(verify);
  verify->add_option("--paths", flags["paths"], "Monte Carlo paths per suite");
  verify->add_flag("--inject-fault", [&](std::int64_t) { flags["inject-fault"] = "1"; },
                   "flip a connection-coefficient sign (self-test)");
  auto* sweep = app.add_subcommand("sweep", "single-period MSE over the (K, N) grid");
  add_common(sweep);
  auto* bounds = app.add_subcommand("bounds", "upper/lower bounds and regime table");
  add_common(bounds);
  auto* price = app.add_subcommand("price", "backward-induction price V0");
  add_common(price);
  price->add_option("--payoff", flags["payoff"], "terminal payoff h_m");
  price->add_option("--early", flags["early"], "payoff h_n for n < m");
  auto* gram = app.add_subcommand("gram", "Gram matrix at t_1");
  add_common(gram);
  gram->add_option("--source", flags["source"], "analytic | paper | sample");
  auto* rate = app.add_subcommand("rate-fit", "fit K*(N) against log N rates");
  rate->add_option("--input", flags["input"], "sweep CSV or JSON")->required();
  rate->add_option("--target", flags["target"], "target sup_mse")->required();
  rate->add_option("--out", flags["out"]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  Settings settings;
  try {
    if (!config_path.empty()) settings.values = read_config_file(config_path);
    for (const auto& [k, v] : flags)
      if (!v.empty()) settings.values[k] = v;
    return run(app.get_subcommands().front()->get_name(), settings);
  } catch (const lsmc::InvalidSpec& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const lsmc::InputError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const lsmc::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
