#include "filterlab/feedback.hpp"

#include "filterlab/errors.hpp"
#include "filterlab/fokker_planck.hpp"
#include "filterlab/parallel.hpp"

#include <cmath>
#include <optional>

namespace filterlab {

ControlPolicy ControlPolicy::zero() { return ControlPolicy{}; }

ControlPolicy ControlPolicy::linear_gain(double K, double lower, double upper) {
  ControlPolicy p;
  p.kind = PolicyKind::linear_gain;
  p.gain = K;
  p.lower = lower;
  p.upper = upper;
  return p;
}

ControlPolicy ControlPolicy::bang_bang(double threshold, double level) {
  ControlPolicy p;
  p.kind = PolicyKind::bang_bang;
  p.threshold = threshold;
  p.level = level;
  p.lower = -std::abs(level);
  p.upper = std::abs(level);
  return p;
}

void ControlPolicy::validate() const {
  if (!(lower <= upper)) throw ConfigError("policy: lower bound exceeds upper bound");
  if (!(lower <= 0.0 && upper >= 0.0)) throw ConfigError("policy: bounds must contain 0");
  if (!std::isfinite(gain) || !std::isfinite(threshold) || !std::isfinite(level))
    throw ConfigError("policy: parameters must be finite");
  if (kind == PolicyKind::bang_bang && threshold < 0.0)
    throw ConfigError("policy: bang_bang threshold must be non-negative");
}

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::zero: return "zero";
    case PolicyKind::linear_gain: return "linear_gain";
    case PolicyKind::bang_bang: return "bang_bang";
  }
  return "?";
}

ControlPolicy policy_from_name(const std::string& name, double gain, double threshold, double level,
                               double lower, double upper) {
  ControlPolicy p;
  if (name == "zero") {
    p.kind = PolicyKind::zero;
  } else if (name == "linear_gain") {
    p.kind = PolicyKind::linear_gain;
  } else if (name == "bang_bang") {
    p.kind = PolicyKind::bang_bang;
  } else {
    throw ConfigError("unknown policy '" + name + "' (expected zero, linear_gain or bang_bang)");
  }
  p.gain = gain;
  p.threshold = threshold;
  p.level = level;
  p.lower = lower;
  p.upper = upper;
  p.validate();
  return p;
}

ControlDecision apply_policy(const ControlPolicy& policy, double, const PosteriorSummary& summary) {
  const Eigen::Index n = summary.mean.size();
  ControlDecision d;
  d.beta = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = summary.mean(i);
    double b = 0.0;
    switch (policy.kind) {
      case PolicyKind::zero: break;
      case PolicyKind::linear_gain: b = -policy.gain * m; break;
      case PolicyKind::bang_bang:
        if (std::abs(m) > policy.threshold) b = m > 0.0 ? -policy.level : policy.level;
        break;
    }
    if (b < policy.lower) {
      b = policy.lower;
      d.clamped = true;
    } else if (b > policy.upper) {
      b = policy.upper;
      d.clamped = true;
    }
    d.beta(i) = b;
  }
  return d;
}

ControlHook make_control_hook(const ControlPolicy& policy) {
  policy.validate();
  return [policy](double t, const PosteriorSummary& s) { return apply_policy(policy, t, s); };
}

std::vector<double> mean_drift(const DiffusionModel& model, std::span<const double> xs,
                               std::span<const Vector> controls) {
  if (controls.empty()) throw ConfigError("mean_drift: no controls");
  std::vector<double> out(xs.size(), 0.0);
  for (const Vector& b : controls) {
    const ConstSpan c(b.data(), static_cast<std::size_t>(b.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] += drift_1d(model, xs[i], c);
  }
  for (double& v : out) v /= static_cast<double>(controls.size());
  return out;
}

std::vector<double> conditional_mean_drift(const DiffusionModel& model, std::span<const double> xs,
                                           std::span<const Vector> controls,
                                           std::span<const std::vector<double>> weights) {
  if (controls.empty() || weights.size() != controls.size())
    throw ConfigError("conditional_mean_drift: need one weight vector per control");
  std::vector<double> num(xs.size(), 0.0), den(xs.size(), 0.0);
  for (std::size_t k = 0; k < controls.size(); ++k) {
    const ConstSpan c(controls[k].data(), static_cast<std::size_t>(controls[k].size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double w = weights[k][i];
      num[i] += w * drift_1d(model, xs[i], c);
      den[i] += w;
    }
  }
  const std::vector<double> plain = mean_drift(model, xs, controls);
  for (std::size_t i = 0; i < xs.size(); ++i) num[i] = den[i] > 0.0 ? num[i] / den[i] : plain[i];
  return num;
}

ControlledLedger run_controlled_experiment(const ControlPolicy& policy, const ExperimentConfig& config) {
  EnsembleConfig ec = config.ensemble;
  ec.control = make_control_hook(policy);
  ec.prior_drift = config.prior_drift;
  ControlledLedger out;
  out.run = run_ensemble(ec);
  std::optional<GridDensity> rho_ss;
  if (ec.model.has_steady_state) rho_ss = steady_state_grid(ec.model, ec.grid);
  out.ledger = build_ledger(out.run, rho_ss ? &*rho_ss : nullptr, config.window);
  for (const EnsembleSample& s : out.run.samples) {
    out.times.push_back(s.t);
    out.mean_control.push_back(s.mean_control);
    out.drift_snapshots.push_back(s.prior_face_drift);
  }
  out.clamped = out.run.clamped;
  return out;
}

GaussianFeedbackRun gaussian_feedback_run(const LinearModel& model, const ControlPolicy& policy,
                                          const GaussianBelief& belief0, double horizon, double dt,
                                          std::size_t trajectories, std::uint64_t seed) {
  model.validate();
  policy.validate();
  if (trajectories == 0) throw ConfigError("gaussian_feedback_run: need at least one trajectory");
  const std::size_t steps = step_count(horizon, dt);
  const std::size_t n = model.dim();
  const Matrix sigma = model.sigma();
  const DiffusionModel dm = make_lqg(model);
  const Matrix C = model.C.size() > 0 ? model.C : Matrix::Zero(1, static_cast<Eigen::Index>(n));

  GaussianFeedbackRun out;
  out.V_hat = riccati_trajectory(model, belief0.cov, dt, steps);
  out.V.reserve(steps + 1);
  out.V.push_back(belief0.cov);
  const auto lyap = [&](const Matrix& V) { return lyapunov_rhs(model.A, sigma, V); };
  for (std::size_t k = 0; k < steps; ++k) out.V.push_back(rk4_step(lyap, out.V.back(), dt));
  for (std::size_t k = 0; k <= steps; ++k) {
    out.times.push_back(static_cast<double>(k) * dt);
    const KbInfoRates r = kb_info_rates(out.V[k], out.V_hat[k], sigma, C);
    out.S_rate.push_back(r.S_rate);
    out.D_rate.push_back(r.D_rate);
  }

  // states[k][step], controls[k][step]
  std::vector<std::vector<Vector>> states(trajectories), controls(trajectories);
  const GaussianInit init{belief0.mean, belief0.cov};
  parallel_for(trajectories, [&](std::size_t k) {
    JointStepper stepper(dm, init.sample(seed, k), dt, seed, k);
    Vector xhat = belief0.mean;
    states[k].reserve(steps + 1);
    controls[k].reserve(steps + 1);
    for (std::size_t s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) * dt;
      PosteriorSummary summary{t, xhat, out.V_hat[s], C * xhat};
      const ControlDecision d = apply_policy(policy, t, summary);
      states[k].push_back(stepper.state());
      controls[k].push_back(d.beta);
      if (s == steps) break;
      stepper.step(ConstSpan(d.beta.data(), n));
      const Vector innovation = stepper.last_increment() - C * xhat * dt;
      xhat = xhat + model.A * xhat * dt + out.V_hat[s] * C.transpose() * innovation + d.beta * dt;
    }
  });
  for (std::size_t s = 0; s <= steps; ++s) {
    Vector ms = Vector::Zero(static_cast<Eigen::Index>(n));
    Vector mc = Vector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < trajectories; ++k) {
      ms += states[k][s];
      mc += controls[k][s];
    }
    out.mean_state.push_back(ms / static_cast<double>(trajectories));
    out.mean_control.push_back(mc / static_cast<double>(trajectories));
  }
  return out;
}

}  // namespace filterlab
