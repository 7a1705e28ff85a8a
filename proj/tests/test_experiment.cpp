#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "lsmc/connection_coeffs.hpp"
#include "lsmc/errors.hpp"
#include "lsmc/experiment.hpp"
#include "lsmc/parallel.hpp"

using namespace lsmc;
using nlohmann::json;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.K = {0, 1, 2};
  c.N = {1000, 3000};
  c.R = 20;
  c.seed = 5;
  return c;
}

std::string sweep_csv(const ExperimentConfig& c) {
  std::ostringstream out;
  write_sweep_csv(out, run_sweep(c));
  return out.str();
}

/// Synthetic sweep with sup_mse = exp(K - K*(N)), so the interpolated K* is
/// exactly the chosen value.
std::vector<SweepRow> synthetic(const std::vector<std::size_t>& Ns, double (*kstar)(double)) {
  std::vector<SweepRow> rows;
  for (std::size_t N : Ns)
    for (int K = 0; K <= 40; ++K) {
      SweepRow r;
      r.K = K;
      r.N = N;
      r.sup_mse = 0.01 * std::exp(K - kstar(static_cast<double>(N)));
      rows.push_back(r);
    }
  return rows;
}

}  // namespace

TEST_CASE("config validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  c.K.clear();
  CHECK_THROWS_AS(c.validate(), InvalidSpec);
  c = ExperimentConfig{};
  c.grid = {0.0, 1.0};
  CHECK_THROWS_AS(c.validate(), InvalidSpec);
  c = ExperimentConfig{};
  c.R = 0;
  CHECK_THROWS_AS(c.validate(), InvalidSpec);
  c = ExperimentConfig{};
  c.process.kind = ProcessKind::Pascal;
  c.process.q = 1.2;
  CHECK_THROWS_AS(c.validate(), InvalidSpec);
  CHECK_THROWS_AS(parse_format("xml"), InvalidSpec);
}

TEST_CASE("sweep: K = 0 rows are exact, rows sorted, status ok") {
  ExperimentConfig c = small_config();
  c.K = {2, 0};
  c.N = {3000, 1000};
  const auto rows = run_sweep(c);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].K == 0);
  CHECK(rows[0].N == 1000);
  CHECK(rows[1].N == 3000);
  CHECK(rows[3].K == 2);
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.runtime_ms == 0.0);
    CHECK(r.diag_mse.size() == static_cast<std::size_t>(r.K + 1));
    if (r.K == 0) CHECK(r.sup_mse == 0.0);
  }
}

TEST_CASE("sweep: 1/N decrease per K") {
  ExperimentConfig c;
  c.K = {1, 2};
  c.N = {1000, 10000, 100000};
  c.R = 60;
  const auto rows = run_sweep(c);
  for (int K : {1, 2}) {
    std::vector<double> mse;
    for (const auto& r : rows)
      if (r.K == K) mse.push_back(r.sup_mse);
    REQUIRE(mse.size() == 3);
    CHECK(mse[1] < mse[0]);
    CHECK(mse[2] < mse[1]);
  }
}

TEST_CASE("sweep: byte-identical output for any worker count") {
  const ExperimentConfig c = small_config();
  const int saved = thread_count();
  set_thread_count(1);
  const std::string a = sweep_csv(c);
  set_thread_count(4);
  const std::string b = sweep_csv(c);
  set_thread_count(saved);
  CHECK(a == b);
  CHECK(a == sweep_csv(c));
}

TEST_CASE("sweep CSV header is fixed") {
  const auto h = sweep_csv_header();
  REQUIRE(h.size() == 10 + kCsvMaxK + 1 + 5);
  CHECK(h[0] == "process");
  CHECK(h[9] == "sup_mse_stderr");
  CHECK(h[10] == "diag_mse_0");
  CHECK(h[10 + kCsvMaxK] == "diag_mse_15");
  CHECK(h[h.size() - 5] == "upper_bound_log10");
  CHECK(h.back() == "status");
  const std::string csv = sweep_csv(small_config());
  CHECK(csv.find('\r') == std::string::npos);
  CHECK(csv.substr(0, csv.find('\n')) ==
        "process,family,t1,t2,K,N,R,seed,sup_mse,sup_mse_stderr,diag_mse_0,diag_mse_1,diag_mse_2,"
        "diag_mse_3,diag_mse_4,diag_mse_5,diag_mse_6,diag_mse_7,diag_mse_8,diag_mse_9,diag_mse_10,"
        "diag_mse_11,diag_mse_12,diag_mse_13,diag_mse_14,diag_mse_15,upper_bound_log10,"
        "lower_bound_log10,regime,runtime_ms,status");
}

TEST_CASE("sweep JSON schema") {
  const ExperimentConfig c = small_config();
  const json j = sweep_json(c, run_sweep(c));
  CHECK(j.at("schema_version") == kSchemaVersion);
  CHECK(j.at("command") == "sweep");
  CHECK(j.at("config").at("K") == json({0, 1, 2}));
  CHECK(j.at("config").at("reps") == 20);
  REQUIRE(j.at("rows").size() == 6);
  for (const char* key : {"process", "family", "t1", "t2", "K", "N", "R", "seed", "sup_mse",
                          "sup_mse_stderr", "diag_mse", "upper_bound_log10", "lower_bound_log10",
                          "regime", "runtime_ms", "status"})
    CHECK(j["rows"][0].contains(key));
  // K = 0: the lower bound is exactly zero, so its log is null.
  CHECK(j["rows"][0]["lower_bound_log10"].is_null());
}

TEST_CASE("sweep round trip through CSV and JSON") {
  const ExperimentConfig c = small_config();
  const auto rows = run_sweep(c);
  std::stringstream csv;
  write_sweep_csv(csv, rows);
  std::stringstream js;
  js << sweep_json(c, rows).dump();
  for (std::stringstream* in : {&csv, &js}) {
    const auto back = read_sweep(*in);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(back[i].K == rows[i].K);
      CHECK(back[i].N == rows[i].N);
      CHECK(back[i].sup_mse == rows[i].sup_mse);
      CHECK(back[i].diag_mse == rows[i].diag_mse);
      CHECK(back[i].regime == rows[i].regime);
    }
  }
  std::stringstream bad("not,a,sweep\n1,2,3\n");
  CHECK_THROWS_AS(read_sweep(bad), InputError);
}

TEST_CASE("per-cell failures are recorded and the sweep continues") {
  ExperimentConfig c;
  c.K = {1};
  c.N = {50, 10000000000};  // beyond the per-stream path range
  c.R = 2;
  const auto rows = run_sweep(c);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].status == "ok");
  CHECK(rows[1].status != "ok");
  CHECK(std::isnan(rows[1].sup_mse));
  std::ostringstream out;
  write_sweep_csv(out, rows);
  const std::string text = out.str();
  const std::string last = text.substr(text.rfind('\n', text.size() - 2) + 1);
  CHECK(std::count(last.begin(), last.end(), ',') == 30);
}

TEST_CASE("rate-fit fixtures") {
  const std::vector<std::size_t> Ns{100, 1000, 10000, 100000, 1000000, 10000000};
  const auto loglog = rate_fit(synthetic(Ns, [](double n) {
                                 return std::round(2 * std::log(n) / std::log(std::log(n)));
                               }),
                               0.01);
  CHECK(loglog.loglog.coefficient == doctest::Approx(2.0).epsilon(0.1));
  CHECK(loglog.preferred == "log_over_loglog");
  const auto logn = rate_fit(synthetic(Ns, [](double n) { return std::round(std::log(n)); }), 0.01);
  CHECK(logn.log.rss < logn.loglog.rss);
  CHECK(logn.preferred == "log");
  const json j = rate_fit_json(logn);
  CHECK(j.at("points").size() == Ns.size());
  CHECK(j.at("models").size() == 2);

  CHECK_THROWS_AS(rate_fit(synthetic({100, 1000}, [](double) { return 3.0; }), 0.01), InputError);
  CHECK_THROWS_AS(rate_fit(synthetic(Ns, [](double) { return 3.0; }), 0.0), InputError);
}

TEST_CASE("rate-fit on a real sweep produces a report") {
  ExperimentConfig c;
  c.K = {0, 1, 2, 3};
  c.N = {1000, 4000, 16000};
  c.R = 20;
  const auto fit = rate_fit(run_sweep(c), 0.01);
  CHECK(fit.points.size() == 3);
  CHECK_FALSE(fit.preferred.empty());
}

TEST_CASE("bounds table") {
  ExperimentConfig c;
  c.K = {0};
  c.N = {100};
  const auto rows = run_bounds(c);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].upper == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(rows[0].lower == 0.0);
  CHECK(rows[0].u == 10.0);
  const json j = bounds_json(c, rows);
  for (const char* key : {"family", "t1", "t2", "K", "N", "upper", "lower", "log10_upper",
                          "log10_lower", "regime", "u", "v", "epsilon"})
    CHECK(j["rows"][0].contains(key));
}

TEST_CASE("gram dump") {
  ExperimentConfig c;
  c.K = {2};
  std::ostringstream out;
  write_gram_csv(out, run_gram(c, GramSource::Analytic));
  CHECK(out.str() == "1,0,0\n0,1,0\n0,0,2\n");
  CHECK_THROWS_AS(run_gram(c, GramSource::Paper), InvalidSpec);
  c.process.kind = ProcessKind::Gamma;
  CHECK(gram_json(c, run_gram(c, GramSource::Paper)).at("provenance") ==
        to_string(GramProvenance::PaperTridiagonal));
  c.N = {5000};
  const GramMatrix s = run_gram(c, GramSource::Sample);
  CHECK(s.sample.has_value());
  CHECK(parse_gram_source("sample") == GramSource::Sample);
  CHECK_THROWS_AS(parse_gram_source("other"), InvalidSpec);
}

TEST_CASE("price command") {
  ExperimentConfig c;
  c.grid = {0.0, 1.0, 2.0, 3.0};
  c.K = {2};
  c.N = {2000};
  const json zero = run_price(c, PriceRequest{});
  CHECK(zero.at("V0") == 0.0);
  CHECK(zero.at("steps").size() == 2);
  const json put = run_price(c, PriceRequest{parse_payoff("put:3"), parse_payoff("put:3")});
  CHECK(put.at("V0").get<double>() >= 2.0);
}

TEST_CASE("payoff parsing") {
  CHECK(parse_payoff("zero").kind == Payoff::Kind::Zero);
  CHECK(parse_payoff("never").kind == Payoff::Kind::Never);
  CHECK(parse_payoff("constant:2.5").value == 2.5);
  CHECK(parse_payoff("call:1").kind == Payoff::Kind::Call);
  CHECK(parse_payoff("basis:0,1,0.5").coeffs == std::vector<double>{0, 1, 0.5});
  CHECK_THROWS_AS(parse_payoff("put"), InvalidSpec);
  CHECK_THROWS_AS(parse_payoff("put:abc"), InvalidSpec);
  CHECK_THROWS_AS(parse_payoff("digital:1"), InvalidSpec);
}

TEST_CASE("verify: passes, and a connection fault is caught") {
  ExperimentConfig c;
  VerifyOptions o;
  o.paths = 50000;
  const VerifyReport ok = run_verify(c, o);
  CHECK(ok.passed());
  CHECK(ok.failures() == 0);
  bool warned = false;
  for (const auto& chk : ok.checks) warned = warned || (chk.suite == "gamma_gram" && chk.status == "warning");
  CHECK(warned);

  o.inject_connection_fault = true;
  const VerifyReport bad = run_verify(c, o);
  CHECK_FALSE(bad.passed());
  bool named = false;
  for (const auto& chk : bad.checks)
    named = named || (chk.suite == "connection_identity" && chk.status == "fail");
  CHECK(named);
  CHECK_FALSE(connection_fault());

  const json j = verify_json(c, bad);
  CHECK(j.at("passed") == false);
  CHECK(j.at("failures").get<int>() > 0);
  for (const auto& chk : j.at("checks"))
    for (const char* key : {"suite", "name", "status", "metric", "tolerance", "detail"})
      CHECK(chk.contains(key));
}
