#pragma once

#include "filterlab/ensemble.hpp"
#include "filterlab/gaussian.hpp"
#include "filterlab/info_metrics.hpp"

#include <limits>
#include <string>
#include <vector>

namespace filterlab {

enum class PolicyKind { zero, linear_gain, bang_bang };

// beta = 0, beta = -K mean, or beta = -level sign(mean) when |mean| > threshold
// (componentwise); every output is clamped to [lower, upper].
struct ControlPolicy {
  PolicyKind kind = PolicyKind::zero;
  double gain = 0.0;
  double threshold = 0.0;
  double level = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  static ControlPolicy zero();
  static ControlPolicy linear_gain(double K, double lower = -std::numeric_limits<double>::infinity(),
                                   double upper = std::numeric_limits<double>::infinity());
  static ControlPolicy bang_bang(double threshold, double level);
  void validate() const;
};

ControlPolicy policy_from_name(const std::string& name, double gain, double threshold, double level,
                               double lower, double upper);
std::string policy_name(PolicyKind kind);

ControlDecision apply_policy(const ControlPolicy& policy, double t, const PosteriorSummary& summary);
ControlHook make_control_hook(const ControlPolicy& policy);

// v(x, t) = mean_k v(x, beta_k) at the given points.
std::vector<double> mean_drift(const DiffusionModel& model, std::span<const double> xs,
                               std::span<const Vector> controls);

// sum_k v(x, beta_k) w_k(x) / sum_k w_k(x); weights[k][i] belongs to xs[i].
// Points where every weight vanishes fall back to the plain mean.
std::vector<double> conditional_mean_drift(const DiffusionModel& model, std::span<const double> xs,
                                           std::span<const Vector> controls,
                                           std::span<const std::vector<double>> weights);

struct ExperimentConfig {
  EnsembleConfig ensemble;  // its control hook is ignored
  PriorDrift prior_drift = PriorDrift::ensemble_mean;
  std::size_t window = 2;
};

struct ControlledLedger {
  InfoLedger ledger;
  std::vector<double> times;
  std::vector<double> mean_control;               // E[beta(t)] at the samples
  std::vector<std::vector<double>> drift_snapshots;  // v at the faces, per sample
  std::size_t clamped = 0;
  EnsembleRun run;
};

ControlledLedger run_controlled_experiment(const ControlPolicy& policy, const ExperimentConfig& config);

// Closed-loop linear-Gaussian ensemble: each trajectory runs the
// Kalman-Bucy filter with beta = policy(Xhat); the prior covariance obeys
// the Lyapunov equation (the mean drift Ax + E beta shifts only the mean).
struct GaussianFeedbackRun {
  std::vector<double> times;
  std::vector<Matrix> V;       // prior covariance
  std::vector<Matrix> V_hat;   // Riccati covariance
  std::vector<double> S_rate;
  std::vector<double> D_rate;
  std::vector<Vector> mean_state;   // ensemble mean of X(t)
  std::vector<Vector> mean_control;
};

GaussianFeedbackRun gaussian_feedback_run(const LinearModel& model, const ControlPolicy& policy,
                                          const GaussianBelief& belief0, double horizon, double dt,
                                          std::size_t trajectories, std::uint64_t seed);

}  // namespace filterlab
