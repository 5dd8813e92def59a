#pragma once

#include "filterlab/diffusion.hpp"
#include "filterlab/grid.hpp"
#include "filterlab/simulate.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace filterlab {

// What a policy may look at: functionals of one trajectory's own posterior.
struct PosteriorSummary {
  double t = 0.0;
  Vector mean;
  Matrix cov;
  Vector pi_h;
};

struct ControlDecision {
  Vector beta;
  bool clamped = false;
};

// Empty hook = uncontrolled run (drift called with no control).
using ControlHook = std::function<ControlDecision(double, const PosteriorSummary&)>;

// Drift of the shared prior density under feedback.
enum class PriorDrift {
  // v(x, t) = mean_k v(x, beta_k), the plain ensemble average.
  ensemble_mean,
  // v(x, t) = sum_k v(x, beta_k) rhohat_k(x) / sum_k rhohat_k(x), the
  // conditional expectation E[v(x, beta) | X = x].
  conditional,
};

struct EnsembleConfig {
  DiffusionModel model;
  Grid1D grid;
  GaussianInit x0;
  double dt = 1e-3;
  double horizon = 1.0;
  std::size_t trajectories = 100;
  std::uint64_t seed = 0;
  std::size_t sample_stride = 1;
  ControlHook control;
  PriorDrift prior_drift = PriorDrift::ensemble_mean;
  bool keep_final_posteriors = false;
};

// Per-trajectory probes at a sample time.
struct TrajectorySample {
  double x = 0.0;
  double post_at_x = 0.0;      // rhohat_t(X_t)
  double prior_at_x = 0.0;     // rho_t(X_t)
  double log_norm = 0.0;       // ln sigma_t(1)
  double score_post = 0.0;     // d/dx ln rhohat_t at X_t
  double score_prior = 0.0;    // d/dx ln rho_t at X_t
  double sigma = 0.0;          // Sigma(X_t)
  double supplied = 0.0;       // 1/2 |h(X_t) - pi_t(h)|^2
  double half_pi_sq = 0.0;     // int_0^t 1/2 |pi_s(h)|^2 ds (left sums)
  double post_mean = 0.0;
  double post_var = 0.0;
  double control = 0.0;        // first component of beta(t), 0 if uncontrolled
  bool excluded = false;
};

struct EnsembleSample {
  double t = 0.0;
  std::size_t step = 0;
  GridDensity prior;
  std::vector<double> prior_face_drift;  // drift used for rho on [t, t + dt]
  std::vector<double> posterior_average; // mean_k rhohat_k, per cell
  double mean_control = 0.0;
  std::size_t excluded = 0;
  std::vector<TrajectorySample> traj;
};

struct EnsembleRun {
  DiffusionModel model;
  Grid1D grid;
  double dt = 0.0;
  double horizon = 0.0;
  std::size_t trajectories = 0;
  std::uint64_t seed = 0;
  std::size_t sample_stride = 1;
  bool controlled = false;
  std::size_t clamped = 0;  // policy outputs clamped to bounds

  std::vector<EnsembleSample> samples;
  GridDensity final_prior;
  std::vector<std::vector<double>> final_posteriors;  // if requested
};

// Step-synchronous ensemble: every trajectory runs (X, Y) by Euler-Maruyama
// and its own Zakai filter (Strang split, normalized each step); the prior
// rho shares the same half steps with the selected drift. Samples are taken
// every sample_stride steps, including t = 0.
EnsembleRun run_ensemble(const EnsembleConfig& config);

}  // namespace filterlab
