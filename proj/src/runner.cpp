#include "filterlab/runner.hpp"

#include "filterlab/ensemble.hpp"
#include "filterlab/errors.hpp"
#include "filterlab/feedback.hpp"
#include "filterlab/fokker_planck.hpp"
#include "filterlab/gaussian.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace filterlab {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string ledger_csv(const InfoLedger& ledger) {
  std::string out = kLedgerHeader;
  out += '\n';
  for (const LedgerRow& r : ledger.rows) {
    const double cols[] = {r.t,           r.H,          r.dH_dt,         r.F,
                           r.dF_dt,       r.trJ_rho,    r.trJ_pi.value,  r.trJ_pi.se,
                           r.S_rate.value, r.S_rate.se, r.D_fisher.value, r.D_fisher.se,
                           r.D_gamma.value, r.D_gamma.se, r.I_mc.value,   r.I_mc.se,
                           r.mwz.value,   r.mwz.se};
    bool first = true;
    for (double v : cols) {
      if (!std::isfinite(v))
        throw NumericalError("non-finite ledger value at t = " + format_number(r.t));
      if (!first) out += ',';
      out += format_number(v);
      first = false;
    }
    out += '\n';
  }
  return out;
}

namespace {

// Worst z-score of value against bound; positive z means a violation side.
struct Worst {
  double z = -std::numeric_limits<double>::infinity();
  double value = 0.0;
  double se = 0.0;
  double t = 0.0;
};

void consider(Worst& w, double z, double value, double se, double t) {
  if (z > w.z) w = {z, value, se, t};
}

// z for "value >= -3 se": -value / se (a zero SE counts only real negatives)
double lower_z(double value, double se) {
  if (se > 0.0) return -value / se;
  return value < -1e-12 ? std::numeric_limits<double>::infinity() : 0.0;
}

double abs_z(double value, double se) {
  if (se > 0.0) return std::abs(value) / se;
  return std::abs(value) > 1e-6 ? std::numeric_limits<double>::infinity() : 0.0;
}

InvariantResult from_worst(const std::string& name, const Worst& w, const char* what) {
  InvariantResult r;
  r.name = name;
  r.tolerance = 3.0;
  r.measured = w.z;
  r.se = w.se;
  r.passed = w.z <= 3.0;
  std::ostringstream d;
  d << "worst " << what << " = " << format_number(w.value) << " (SE " << format_number(w.se)
    << ") at t = " << format_number(w.t);
  r.detail = d.str();
  return r;
}

}  // namespace

std::vector<InvariantResult> ledger_invariants(const InfoLedger& ledger) {
  Worst s, d, agree, info, mwz;
  for (const LedgerRow& r : ledger.rows) {
    consider(s, lower_z(r.S_rate.value, r.S_rate.se), r.S_rate.value, r.S_rate.se, r.t);
    consider(d, lower_z(r.D_gamma.value, r.D_gamma.se), r.D_gamma.value, r.D_gamma.se, r.t);
    const double diff = r.D_fisher.value - r.D_gamma.value;
    const double se = std::hypot(r.D_fisher.se, r.D_gamma.se);
    consider(agree, abs_z(diff, se), diff, se, r.t);
    consider(info, lower_z(r.I_mc.value, r.I_mc.se), r.I_mc.value, r.I_mc.se, r.t);
    consider(mwz, abs_z(r.mwz.value, r.mwz.se), r.mwz.value, r.mwz.se, r.t);
  }
  std::vector<InvariantResult> out;
  out.push_back(from_worst("supplied_rate_nonnegative", s, "S_rate"));
  out.push_back(from_worst("dissipated_rate_nonnegative", d, "D_rate_gamma"));
  out.push_back(from_worst("dissipated_forms_agree", agree, "D_fisher - D_gamma"));
  out.push_back(from_worst("mutual_information_nonnegative", info, "I_mc"));
  out.push_back(from_worst("mwz_residual", mwz, "residual"));
  InvariantResult ex;
  ex.name = "exclusions_below_0.1pct";
  ex.measured = static_cast<double>(ledger.max_excluded);
  ex.tolerance = 1e-3 * static_cast<double>(ledger.trajectories);
  ex.passed = ledger.valid;
  ex.detail = "max excluded trajectories at one sample";
  out.push_back(ex);
  return out;
}

namespace {

InfoLedger gaussian_ledger(const ScenarioConfig& c) {
  if (c.policy) throw ConfigError("config: the gaussian engine does not take a policy");
  const LinearModel lm = build_linear_model(c);
  const std::size_t n = lm.dim();
  if (!is_hurwitz(lm.A)) throw ConfigError("config: A is not Hurwitz, the model has no steady state");
  const Matrix sigma = lm.sigma();
  const Matrix C = lm.C.size() > 0 ? lm.C : Matrix::Zero(1, static_cast<Eigen::Index>(n));
  const Matrix V_ss = lyapunov_steady(lm.A, sigma);
  Vector mu0 = c.init_mean.size() > 0 ? c.init_mean : Vector::Zero(static_cast<Eigen::Index>(n));
  if (static_cast<std::size_t>(mu0.size()) != n || static_cast<std::size_t>(c.init_cov.rows()) != n ||
      static_cast<std::size_t>(c.init_cov.cols()) != n)
    throw ConfigError("config: init mean/cov do not match the state dimension");
  require_positive_definite(c.init_cov, "init.cov");

  const std::size_t steps = step_count(c.horizon, c.dt);
  const std::vector<Matrix> V_hat = riccati_trajectory(lm, c.init_cov, c.dt, steps);
  std::vector<Matrix> V{c.init_cov};
  std::vector<Matrix> mu{mu0};
  const auto lyap = [&](const Matrix& M) { return lyapunov_rhs(lm.A, sigma, M); };
  const auto lin = [&](const Matrix& m) -> Matrix { return lm.A * m; };
  for (std::size_t k = 0; k < steps; ++k) {
    V.push_back(rk4_step(lyap, V.back(), c.dt));
    mu.push_back(rk4_step(lin, mu.back(), c.dt));
  }
  const auto info = [&](std::size_t k) { return kb_info_rates(V[k], V_hat[k], sigma, C); };

  InfoLedger ledger;
  ledger.trajectories = 0;
  ledger.dt = c.dt;
  ledger.seed = c.seed;
  for (std::size_t k = 0; k <= steps; k += c.sample_stride) {
    const double t = static_cast<double>(k) * c.dt;
    const SurpriseLedgerPoint p = surprise_ledger(GaussianBelief{mu[k], V[k]}, V_ss, lm.A, sigma, t);
    const KbInfoRates r = info(k);
    LedgerRow row;
    row.t = t;
    row.H = p.H;
    row.dH_dt = p.dH_dt;
    row.F = p.F;
    row.dF_dt = p.dF_dt;
    row.trJ_rho = (sigma * spd_inverse(V[k])).trace();
    row.trJ_pi = {(sigma * spd_inverse(V_hat[k])).trace(), 0.0};
    row.S_rate = {r.S_rate, 0.0};
    row.D_fisher = {r.D_rate, 0.0};
    row.D_gamma = {r.D_rate, 0.0};
    row.I_mc = {r.I_closed, 0.0};
    row.I_zakai = row.I_mc;
    // second-order differences on the integration step (one-sided at the ends);
    // the error bar is the Richardson estimate from the doubled step
    auto deriv = [&](std::size_t m) {
      const double h = static_cast<double>(m) * c.dt;
      if (k < m) {
        return (-3.0 * info(k).I_closed + 4.0 * info(k + m).I_closed - info(k + 2 * m).I_closed) / (2.0 * h);
      }
      if (k + m > steps) {
        return (3.0 * info(k).I_closed - 4.0 * info(k - m).I_closed + info(k - 2 * m).I_closed) / (2.0 * h);
      }
      return (info(k + m).I_closed - info(k - m).I_closed) / (2.0 * h);
    };
    const double dI = deriv(1);
    row.mwz = {dI - r.I_rate, std::abs(dI - deriv(2)) / 3.0};
    ledger.rows.push_back(row);
  }
  return ledger;
}

std::string snapshots_csv(const EnsembleRun& run) {
  std::string out = "t,x,rho,rho_hat_mean\n";
  const std::vector<double> xs = run.grid.centers();
  for (const EnsembleSample& s : run.samples) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out += format_number(s.t) + ',' + format_number(xs[i]) + ',' + format_number(s.prior.values[i]) +
             ',' + format_number(s.posterior_average[i]) + '\n';
    }
  }
  return out;
}

}  // namespace

RunOutput run_scenario(const ScenarioConfig& c) {
  nlohmann::ordered_json report;
  report["version"] = kVersionTag;
  report["scenario"] = c.name;
  report["engine"] = c.engine;
  report["seed"] = c.seed;
  report["dt"] = c.dt;
  report["horizon"] = c.horizon;

  RunOutput out;
  InfoLedger ledger;
  std::optional<TowerCheck> tower;
  std::size_t clamped = 0;
  bool controlled = false;

  if (c.engine == "gaussian") {
    ledger = gaussian_ledger(c);
  } else {
    const DiffusionModel model = build_model(c);
    if (model.dim_state != 1) throw ConfigError("config: the grid engine is one-dimensional");
    if (!model.has_steady_state)
      throw ConfigError("config: the grid engine needs a model with a steady state (F is relative to it)");
    if (c.init_cov.rows() != 1 || c.init_cov.cols() != 1 || !(c.init_cov(0, 0) > 0.0))
      throw ConfigError("config: init.variance must be a positive scalar");
    if (c.init_mean.size() > 1) throw ConfigError("config: init.mean must be a scalar");

    EnsembleConfig ec;
    ec.model = model;
    ec.grid = build_grid(c, model);
    ec.x0 = GaussianInit{c.init_mean.size() == 1 ? c.init_mean : Vector::Zero(1), c.init_cov};
    ec.dt = c.dt;
    ec.horizon = c.horizon;
    ec.trajectories = c.trajectories;
    ec.seed = c.seed;
    ec.sample_stride = c.sample_stride;
    ec.keep_final_posteriors = c.tower;
    if (c.policy) {
      const PolicySpec& p = *c.policy;
      const ControlPolicy policy = policy_from_name(p.name, p.gain, p.threshold, p.level, p.lower, p.upper);
      ec.control = make_control_hook(policy);
      ec.prior_drift = p.prior_drift;
      controlled = true;
      if (c.trajectories < 100)
        std::cerr << "warning: N = " << c.trajectories
                  << " < 100, the mean drift estimate will be noisy\n";
      report["policy"] = {{"name", p.name},
                          {"gain", p.gain},
                          {"threshold", p.threshold},
                          {"level", p.level},
                          {"prior_drift", p.prior_drift == PriorDrift::conditional ? "conditional"
                                                                                   : "ensemble_mean"}};
    }
    const EnsembleRun run = run_ensemble(ec);
    const GridDensity rho_ss = steady_state_grid(model, ec.grid);
    ledger = build_ledger(run, &rho_ss, c.window);
    clamped = run.clamped;
    if (c.tower) tower = tower_property(run);
    if (c.snapshots) out.snapshots_csv = snapshots_csv(run);
    report["grid"] = {{"x_min", ec.grid.x_min}, {"x_max", ec.grid.x_max}, {"n_cells", ec.grid.n_cells}};
    if (controlled) {
      nlohmann::ordered_json mc = nlohmann::ordered_json::array();
      for (const EnsembleSample& s : run.samples) mc.push_back({s.t, s.mean_control});
      report["mean_control"] = mc;
    }
  }

  out.ledger_csv = ledger_csv(ledger);
  out.excluded = ledger.max_excluded;

  nlohmann::ordered_json inv = nlohmann::ordered_json::array();
  const auto add = [&](const InvariantResult& r) {
    inv.push_back({{"name", r.name},
                   {"passed", r.passed},
                   {"measured", r.measured},
                   {"tolerance", r.tolerance},
                   {"se", r.se},
                   {"detail", r.detail}});
    out.all_passed = out.all_passed && r.passed;
  };
  for (const InvariantResult& r : ledger_invariants(ledger)) add(r);
  if (tower) {
    InvariantResult r;
    r.name = "tower_property";
    r.measured = tower->l1;
    r.se = tower->l1_se;
    r.tolerance = 3.0 * tower->l1_se;
    r.passed = tower->l1 <= r.tolerance;
    r.detail = "L1 distance of mean posterior to prior at T, bootstrap SE over " +
               std::to_string(tower->resamples) + " resamples";
    add(r);
  }
  report["trajectories"] = c.engine == "gaussian" ? 0 : c.trajectories;
  report["samples"] = ledger.rows.size();
  report["excluded_max"] = ledger.max_excluded;
  report["valid"] = ledger.valid;
  report["clamped_controls"] = clamped;
  report["invariants"] = inv;
  report["all_passed"] = out.all_passed;
  report["config"] = c.source;
  out.report_json = report.dump(2) + "\n";
  return out;
}

void write_outputs(const ScenarioConfig& c, const RunOutput& output) {
  namespace fs = std::filesystem;
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + c.output_dir + "': " + ec.message());
  const auto put = [&](const char* name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    f << text;
    if (!f) throw ConfigError("cannot write '" + (dir / name).string() + "'");
  };
  put("ledger.csv", output.ledger_csv);
  put("report.json", output.report_json);
  if (!output.snapshots_csv.empty()) put("snapshots.csv", output.snapshots_csv);
}

}  // namespace filterlab
