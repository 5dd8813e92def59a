#include "filterlab/acceptance.hpp"
#include "filterlab/config.hpp"
#include "filterlab/errors.hpp"
#include "filterlab/parallel.hpp"
#include "filterlab/runner.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

using namespace filterlab;

namespace {

int do_run(const std::string& spec) {
  const auto start = std::chrono::steady_clock::now();
  const ScenarioConfig config = resolve_config(spec);
  const RunOutput out = run_scenario(config);
  write_outputs(config, out);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "scenario " << config.name << " -> " << config.output_dir << "\n";
  std::cout << "excluded trajectories (max per sample): " << out.excluded << "\n";
  std::cout << "invariants: " << (out.all_passed ? "all passed" : "some failed, see report.json") << "\n";
  std::cout << "wall clock: " << secs << " s (" << worker_count() << " workers)\n";
  return 0;
}

int do_check(const std::string& suite, std::uint64_t seed, const std::string& scale) {
  AcceptanceOptions options;
  options.seed = seed;
  options.scale = scale_from_name(scale);
  const auto results = run_suite(suite, options);
  bool ok = true;
  for (const CriterionResult& r : results) {
    std::cout << format_result(r) << "\n";
    if (!r.informational) ok = ok && r.passed;
  }
  std::cout << "suite " << suite << ": " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"filterlab: information flow in nonlinear filters"};
  app.require_subcommand(1);

  std::string spec;
  auto* run = app.add_subcommand("run", "run a scenario and write ledger.csv / report.json");
  run->add_option("config", spec, "config file or builtin:<name>")->required();

  std::string suite;
  std::uint64_t seed = 12345;
  std::string scale = "full";
  auto* check = app.add_subcommand("check", "run acceptance criteria");
  check->add_option("suite", suite, "gaussian | grid | infoflow | feedback | all")->required();
  check->add_option("--seed", seed, "master seed");
  check->add_option("--scale", scale, "small | full");

  auto* list = app.add_subcommand("list-scenarios", "list built-in scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return do_run(spec);
    if (*check) return do_check(suite, seed, scale);
    if (*list) {
      for (const BuiltinScenario& b : builtin_scenarios()) std::cout << b.name << "\t" << b.description << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
