#include "filterlab/config.hpp"
#include "filterlab/errors.hpp"
#include "filterlab/runner.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <sstream>

using namespace filterlab;

namespace {

const char* kSmallOu =
    "[scenario]\nname = tiny\nseed = 99\n"
    "[model]\npreset = ou\nrate = 1\ndiffusion = 2\nobs_gain = 1\n"
    "[init]\nmean = 0.5\nvariance = 0.5\n"
    "[grid]\nn_cells = 128\n"
    "[time]\ndt = 1e-3\nhorizon = 0.1\nsample_stride = 10\n"
    "[ensemble]\ntrajectories = 16\n";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("builtin scenarios parse") {
  for (const BuiltinScenario& b : builtin_scenarios()) {
    CAPTURE(b.name);
    const ScenarioConfig c = resolve_config("builtin:" + b.name);
    CHECK(c.name == b.name);
    CHECK(c.dt > 0.0);
  }
  CHECK_THROWS_AS(resolve_config("builtin:nope"), ConfigError);
}

TEST_CASE("config fields") {
  const ScenarioConfig c = parse_config_text(kSmallOu);
  CHECK(c.seed == 99);
  CHECK(c.preset == "ou");
  CHECK(c.params.at("rate") == 1.0);
  CHECK(c.n_cells == 128);
  CHECK(c.trajectories == 16);
  CHECK(c.sample_stride == 10);
  CHECK(c.init_cov(0, 0) == 0.5);
  CHECK_FALSE(c.policy.has_value());
}

TEST_CASE("config validation") {
  const std::string base = kSmallOu;
  CHECK_THROWS_AS(parse_config_text(replace(base, "seed = 99\n", "")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(base, "dt = 1e-3", "dt = 0")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(base, "dt = 1e-3", "dt = -1e-3")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(base, "horizon = 0.1", "horizon = 0.005")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(base, "horizon = 0.1", "horizon = 0.1005")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(base, "trajectories = 16", "trajectories = 0")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(base, "rate = 1\n", "")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(base, "rate = 1", "rate = fast")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(base, "rate = 1", "rat = 1")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(base + "[extras]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(base, "preset = ou", "preset = lorenz")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(base + "[policy]\nname = pid\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(base + "[policy]\nname = linear_gain\nprior_drift = weird\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(base, "name = tiny", "name = tiny\nengine = spectral")), ConfigError);
}

TEST_CASE("matrices") {
  const Matrix m = parse_matrix("1 2; 3 4.5");
  CHECK(m.rows() == 2);
  CHECK(m(1, 1) == 4.5);
  CHECK(parse_matrix("-1").size() == 1);
  CHECK_THROWS_AS(parse_matrix("1 2; 3"), ConfigError);
  CHECK_THROWS_AS(parse_matrix(""), ConfigError);
}

TEST_CASE("ledger CSV format") {
  InfoLedger ledger;
  LedgerRow r;
  r.t = 0.1;
  r.H = 1.0 / 3.0;
  ledger.rows.push_back(r);
  const std::string csv = ledger_csv(ledger);
  CHECK(csv.rfind(std::string(kLedgerHeader) + "\n", 0) == 0);
  CHECK(csv.find("0.33333333333333331") != std::string::npos);
  CHECK(format_number(0.1) == "0.10000000000000001");
  ledger.rows[0].F = std::nan("");
  CHECK_THROWS_AS(ledger_csv(ledger), NumericalError);
}

TEST_CASE("grid run: shape, determinism and worker invariance") {
  const ScenarioConfig c = parse_config_text(kSmallOu);
  setenv("FILTERLAB_WORKERS", "1", 1);
  const RunOutput a = run_scenario(c);
  setenv("FILTERLAB_WORKERS", "3", 1);
  const RunOutput b = run_scenario(c);
  unsetenv("FILTERLAB_WORKERS");
  CHECK(a.ledger_csv == b.ledger_csv);
  CHECK(a.report_json == b.report_json);
  CHECK(count_lines(a.ledger_csv) == 1 + 11);

  const auto report = nlohmann::json::parse(a.report_json);
  CHECK(report["seed"] == 99);
  CHECK(report["invariants"].size() >= 6);
  CHECK(report["config"].get<std::string>() == kSmallOu);
}

TEST_CASE("grid run rejects models without a steady state") {
  const std::string text = replace(replace(kSmallOu, "preset = ou", "preset = brownian"), "rate = 1\n", "");
  CHECK_THROWS_AS(run_scenario(parse_config_text(text)), ConfigError);
}

TEST_CASE("gaussian engine ledger") {
  const ScenarioConfig c = resolve_config("builtin:lqg_closed_form");
  const RunOutput out = run_scenario(c);
  CHECK(out.all_passed);
  std::istringstream in(out.ledger_csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == kLedgerHeader);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 18);
    CHECK(std::abs(v[16]) < 1e-5);  // mwz residual
    CHECK(v[4] <= 1e-12);           // dF/dt
    ++rows;
  }
  CHECK(rows == 51);
}
