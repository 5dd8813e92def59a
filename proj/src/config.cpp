#include "filterlab/config.hpp"

#include "filterlab/errors.hpp"
#include "filterlab/fokker_planck.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace filterlab {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"scenario", {"name", "seed", "engine"}},
      {"model", {"preset", "rate", "diffusion", "scale", "obs_gain", "half_width", "A", "B", "C"}},
      {"init", {"mean", "variance", "cov"}},
      {"grid", {"n_cells", "x_min", "x_max"}},
      {"time", {"dt", "horizon", "sample_stride"}},
      {"ensemble", {"trajectories", "window"}},
      {"policy", {"name", "gain", "threshold", "level", "lower", "upper", "prior_drift"}},
      {"output", {"dir", "snapshots", "tower"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  double v = 0.0;
  in >> v;
  if (in.fail() || !in.eof() || !std::isfinite(v)) {
    // allow trailing whitespace only
    std::string rest;
    in.clear();
    std::getline(in, rest);
    if (in.fail() || !trim(rest).empty() || !std::isfinite(v))
      throw ConfigError("config: '" + key + "' is not a finite number: '" + value + "'");
  }
  return v;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("config: '" + key + "' must be a non-negative integer: '" + value + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' is out of range: '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + key + "' must be true or false: '" + value + "'");
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  }
  std::optional<double> number(const std::string& section, const std::string& key) const {
    const auto v = get(section, key);
    if (!v) return std::nullopt;
    return to_double(section + "." + key, *v);
  }
  double require_number(const std::string& section, const std::string& key) const {
    const auto v = number(section, key);
    if (!v) throw ConfigError("config: missing required key " + section + "." + key);
    return *v;
  }

 private:
  const pt::ptree& tree_;
};

}  // namespace

Matrix parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream all(text);
  std::string row;
  while (std::getline(all, row, ';')) {
    std::istringstream in(row);
    std::vector<double> values;
    std::string token;
    while (in >> token) values.push_back(to_double("matrix entry", token));
    if (!values.empty()) rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ConfigError("config: empty matrix '" + text + "'");
  const std::size_t cols = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ConfigError("config: ragged matrix '" + text + "'");
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

ScenarioConfig parse_config_text(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = allowed_keys().find(section);
    if (it == allowed_keys().end()) throw ConfigError("config: unknown section [" + section + "]");
    if (body.empty() && !body.data().empty())
      throw ConfigError("config: key '" + section + "' outside any section");
    for (const auto& [key, value] : body) {
      (void)value;
      if (!it->second.count(key)) throw ConfigError("config: unknown key " + section + "." + key);
    }
  }
  const Reader r(tree);
  ScenarioConfig c;
  c.source = text;

  c.name = r.get("scenario", "name").value_or("scenario");
  const auto seed = r.get("scenario", "seed");
  if (!seed) throw ConfigError("config: scenario.seed is required (no clock default)");
  c.seed = to_unsigned("scenario.seed", *seed);
  c.engine = r.get("scenario", "engine").value_or("grid");
  if (c.engine != "grid" && c.engine != "gaussian")
    throw ConfigError("config: scenario.engine must be grid or gaussian");

  const auto preset = r.get("model", "preset");
  if (!preset) throw ConfigError("config: model.preset is required");
  c.preset = *preset;
  for (const char* key : {"rate", "diffusion", "scale", "obs_gain", "half_width"})
    if (const auto v = r.number("model", key)) c.params[key] = *v;
  if (c.preset == "lqg") {
    const auto A = r.get("model", "A");
    const auto B = r.get("model", "B");
    if (!A || !B) throw ConfigError("config: lqg needs model.A and model.B");
    c.A = parse_matrix(*A);
    c.B = parse_matrix(*B);
    if (const auto C = r.get("model", "C")) c.C = parse_matrix(*C);
  } else if (c.preset == "brownian") {
    if (!c.params.count("diffusion")) throw ConfigError("config: brownian needs model.diffusion");
  } else if (c.preset == "ou") {
    if (!c.params.count("rate") || !c.params.count("diffusion"))
      throw ConfigError("config: ou needs model.rate and model.diffusion");
  } else if (c.preset == "double_well") {
    if (!c.params.count("scale") || !c.params.count("diffusion"))
      throw ConfigError("config: double_well needs model.scale and model.diffusion");
  } else {
    throw ConfigError("config: unknown model preset '" + c.preset + "'");
  }

  if (const auto m = r.get("init", "mean")) {
    c.init_mean = parse_matrix(*m).reshaped();
  }
  if (const auto cov = r.get("init", "cov")) {
    c.init_cov = parse_matrix(*cov);
  } else if (const auto var = r.number("init", "variance")) {
    c.init_cov = Matrix::Constant(1, 1, *var);
  } else {
    throw ConfigError("config: init.variance (or init.cov) is required");
  }

  if (const auto n = r.get("grid", "n_cells")) c.n_cells = to_unsigned("grid.n_cells", *n);
  c.x_min = r.number("grid", "x_min");
  c.x_max = r.number("grid", "x_max");

  c.dt = r.require_number("time", "dt");
  c.horizon = r.require_number("time", "horizon");
  if (const auto s = r.get("time", "sample_stride")) c.sample_stride = to_unsigned("time.sample_stride", *s);
  if (const auto n = r.get("ensemble", "trajectories"))
    c.trajectories = to_unsigned("ensemble.trajectories", *n);
  if (const auto w = r.get("ensemble", "window")) c.window = to_unsigned("ensemble.window", *w);

  if (tree.get_child_optional("policy")) {
    PolicySpec p;
    p.name = r.get("policy", "name").value_or("zero");
    p.gain = r.number("policy", "gain").value_or(0.0);
    p.threshold = r.number("policy", "threshold").value_or(0.0);
    p.level = r.number("policy", "level").value_or(0.0);
    p.lower = r.number("policy", "lower").value_or(-std::numeric_limits<double>::infinity());
    p.upper = r.number("policy", "upper").value_or(std::numeric_limits<double>::infinity());
    const std::string drift = r.get("policy", "prior_drift").value_or("ensemble_mean");
    if (drift == "ensemble_mean") {
      p.prior_drift = PriorDrift::ensemble_mean;
    } else if (drift == "conditional") {
      p.prior_drift = PriorDrift::conditional;
    } else {
      throw ConfigError("config: policy.prior_drift must be ensemble_mean or conditional");
    }
    policy_from_name(p.name, p.gain, p.threshold, p.level, p.lower, p.upper);
    c.policy = p;
  }

  c.output_dir = r.get("output", "dir").value_or("out/" + c.name);
  if (const auto s = r.get("output", "snapshots")) c.snapshots = to_bool("output.snapshots", *s);
  if (const auto s = r.get("output", "tower")) c.tower = to_bool("output.tower", *s);

  if (!(c.dt > 0.0)) throw ConfigError("config: time.dt must be positive");
  if (!(c.horizon >= 10.0 * c.dt)) throw ConfigError("config: time.horizon must be at least 10 dt");
  step_count(c.horizon, c.dt);
  if (c.trajectories < 1) throw ConfigError("config: ensemble.trajectories must be at least 1");
  if (c.sample_stride < 1) throw ConfigError("config: time.sample_stride must be at least 1");
  if (c.window < 1) throw ConfigError("config: ensemble.window must be at least 1");
  if (c.n_cells < 16) throw ConfigError("config: grid.n_cells must be at least 16");
  if (c.x_min.has_value() != c.x_max.has_value())
    throw ConfigError("config: give both grid.x_min and grid.x_max or neither");
  if (c.engine == "gaussian" && c.preset != "lqg" && c.preset != "ou")
    throw ConfigError("config: the gaussian engine needs a linear preset (lqg or ou)");
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

const std::vector<BuiltinScenario>& builtin_scenarios() {
  static const std::vector<BuiltinScenario> list = {
      {"lqg_scalar", "scalar LQG (A=-1, Sigma=2, C=1) through the grid Zakai filter, N=1000",
       "[scenario]\nname = lqg_scalar\nseed = 12345\nengine = grid\n"
       "[model]\npreset = lqg\nA = -1\nB = 1.4142135623730951\nC = 1\n"
       "[init]\nmean = 0\nvariance = 1\n"
       "[grid]\nn_cells = 512\n"
       "[time]\ndt = 1e-3\nhorizon = 3\nsample_stride = 50\n"
       "[ensemble]\ntrajectories = 1000\n"
       "[output]\ndir = out/lqg_scalar\n"},
      {"lqg_closed_form", "two-dimensional LQG ledger from the exact Gaussian formulas",
       "[scenario]\nname = lqg_closed_form\nseed = 1\nengine = gaussian\n"
       "[model]\npreset = lqg\nA = -1 1; 0 -2\nB = 1 0; 0 1\nC = 1 0\n"
       "[init]\nmean = 1; 0\ncov = 1 0; 0 1\n"
       "[time]\ndt = 1e-3\nhorizon = 5\nsample_stride = 100\n"
       "[output]\ndir = out/lqg_closed_form\n"},
      {"ou_relaxation", "OU relaxing from N(1, 0.25) with weak observations",
       "[scenario]\nname = ou_relaxation\nseed = 7\n"
       "[model]\npreset = ou\nrate = 1\ndiffusion = 2\nobs_gain = 0.5\n"
       "[init]\nmean = 1\nvariance = 0.25\n"
       "[time]\ndt = 1e-3\nhorizon = 2\nsample_stride = 50\n"
       "[ensemble]\ntrajectories = 500\n"
       "[output]\ndir = out/ou_relaxation\nsnapshots = true\n"},
      {"double_well", "double well v = x - x^3, Sigma = 0.5, h = x, N = 2000",
       "[scenario]\nname = double_well\nseed = 12345\n"
       "[model]\npreset = double_well\nscale = 1\ndiffusion = 0.5\nobs_gain = 1\n"
       "[init]\nmean = 0\nvariance = 0.25\n"
       "[time]\ndt = 1e-3\nhorizon = 2\nsample_stride = 50\n"
       "[ensemble]\ntrajectories = 2000\n"
       "[output]\ndir = out/double_well\nsnapshots = true\ntower = true\n"},
      {"double_well_feedback", "double well under beta = -0.5 x posterior mean, N = 2000",
       "[scenario]\nname = double_well_feedback\nseed = 12345\n"
       "[model]\npreset = double_well\nscale = 1\ndiffusion = 0.5\nobs_gain = 1\n"
       "[init]\nmean = 0\nvariance = 0.25\n"
       "[time]\ndt = 1e-3\nhorizon = 2\nsample_stride = 50\n"
       "[ensemble]\ntrajectories = 2000\n"
       "[policy]\nname = linear_gain\ngain = 0.5\n"
       "[output]\ndir = out/double_well_feedback\ntower = true\n"},
  };
  return list;
}

ScenarioConfig resolve_config(const std::string& spec) {
  const std::string prefix = "builtin:";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string name = spec.substr(prefix.size());
    for (const auto& b : builtin_scenarios())
      if (b.name == name) return parse_config_text(b.text);
    throw ConfigError("unknown builtin scenario '" + name + "' (see list-scenarios)");
  }
  return load_config(spec);
}

DiffusionModel build_model(const ScenarioConfig& c) {
  const auto param = [&](const char* key, double fallback) {
    const auto it = c.params.find(key);
    return it == c.params.end() ? fallback : it->second;
  };
  if (c.preset == "brownian")
    return make_brownian(param("diffusion", 1.0), param("obs_gain", 0.0), param("half_width", 10.0));
  if (c.preset == "ou") return make_ou(param("rate", 1.0), param("diffusion", 1.0), param("obs_gain", 0.0));
  if (c.preset == "double_well")
    return make_double_well(param("scale", 1.0), param("diffusion", 1.0), param("obs_gain", 1.0));
  if (c.preset == "lqg") return make_lqg(build_linear_model(c));
  throw ConfigError("config: unknown model preset '" + c.preset + "'");
}

LinearModel build_linear_model(const ScenarioConfig& c) {
  LinearModel lm;
  if (c.preset == "lqg") {
    lm.A = c.A;
    lm.B = c.B;
    lm.C = c.C;
  } else if (c.preset == "ou") {
    const auto get = [&](const char* k, double d) {
      const auto it = c.params.find(k);
      return it == c.params.end() ? d : it->second;
    };
    if (!(get("rate", 1.0) > 0.0) || !(get("diffusion", 1.0) > 0.0))
      throw ConfigError("ou: rate and diffusion must be positive");
    lm.A = Matrix::Constant(1, 1, -get("rate", 1.0));
    lm.B = Matrix::Constant(1, 1, std::sqrt(get("diffusion", 1.0)));
    lm.C = Matrix::Constant(1, 1, get("obs_gain", 0.0));
  } else {
    throw ConfigError("config: preset '" + c.preset + "' is not linear");
  }
  lm.validate();
  return lm;
}

Grid1D build_grid(const ScenarioConfig& c, const DiffusionModel& model) {
  if (c.x_min) return Grid1D::make(*c.x_min, *c.x_max, c.n_cells);
  return default_grid(model, c.n_cells);
}

}  // namespace filterlab
