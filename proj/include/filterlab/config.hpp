#pragma once

#include "filterlab/diffusion.hpp"
#include "filterlab/ensemble.hpp"
#include "filterlab/feedback.hpp"
#include "filterlab/gaussian.hpp"
#include "filterlab/grid.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace filterlab {

struct PolicySpec {
  std::string name = "zero";
  double gain = 0.0;
  double threshold = 0.0;
  double level = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  PriorDrift prior_drift = PriorDrift::ensemble_mean;
};

// Flat INI scenario:
//   [scenario] name, seed, engine (grid | gaussian)
//   [model]    preset (brownian | ou | lqg | double_well) + parameters
//   [init]     mean, variance (or cov for the gaussian engine)
//   [grid]     n_cells, x_min, x_max
//   [time]     dt, horizon, sample_stride
//   [ensemble] trajectories, window
//   [policy]   name, gain, threshold, level, lower, upper, prior_drift
//   [output]   dir, snapshots, tower
// Matrices are written row by row: "a b; c d".
struct ScenarioConfig {
  std::string name;
  std::uint64_t seed = 0;
  std::string engine = "grid";

  std::string preset;
  std::map<std::string, double> params;
  Matrix A, B, C;

  Vector init_mean;
  Matrix init_cov;

  std::size_t n_cells = 512;
  std::optional<double> x_min, x_max;

  double dt = 0.0;
  double horizon = 0.0;
  std::size_t sample_stride = 1;

  std::size_t trajectories = 1;
  std::size_t window = 2;

  std::optional<PolicySpec> policy;

  std::string output_dir = "out";
  bool snapshots = false;
  bool tower = false;

  std::string source;  // config text as read, echoed into reports
};

ScenarioConfig parse_config_text(const std::string& text);
ScenarioConfig load_config(const std::string& path);

// "builtin:<name>" or a file path.
ScenarioConfig resolve_config(const std::string& spec);

struct BuiltinScenario {
  std::string name;
  std::string description;
  std::string text;
};
const std::vector<BuiltinScenario>& builtin_scenarios();

DiffusionModel build_model(const ScenarioConfig& config);
LinearModel build_linear_model(const ScenarioConfig& config);
Grid1D build_grid(const ScenarioConfig& config, const DiffusionModel& model);

Matrix parse_matrix(const std::string& text);

}  // namespace filterlab
