#pragma once

#include "filterlab/diffusion.hpp"
#include "filterlab/rng.hpp"

#include <cstdint>
#include <vector>

namespace filterlab {

// X(0) ~ N(mean, cov).
struct GaussianInit {
  Vector mean;
  Matrix cov;

  Vector sample(std::uint64_t seed, std::uint64_t trajectory) const;
};

struct JointPath {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<Vector> states;           // X(t_k), k = 0..K
  std::vector<Vector> observations;     // Y(t_k), Y(0) = 0
  std::vector<Vector> obs_increments;   // dY_k = Y(t_{k+1}) - Y(t_k), k = 0..K-1
  std::uint64_t seed = 0;
  std::uint64_t trajectory_index = 0;

  std::size_t steps() const { return obs_increments.size(); }
};

// Euler-Maruyama stepper for (X, Y). Step k draws W from channel
// state_noise at counters k*r .. k*r+r-1 and U from observation_noise at
// k*p .. k*p+p-1, so the path depends only on (seed, trajectory, controls).
class JointStepper {
 public:
  JointStepper(const DiffusionModel& model, Vector x0, double dt, std::uint64_t seed,
               std::uint64_t trajectory);

  // Advances one step with the given control (empty = uncontrolled).
  // Throws NumericalError when X is non-finite or leaves 10x the domain box.
  void step(ConstSpan control = {});

  const Vector& state() const { return x_; }
  const Vector& observation() const { return y_; }
  const Vector& last_increment() const { return dy_; }
  std::uint64_t step_index() const { return k_; }
  double time() const { return static_cast<double>(k_) * dt_; }

 private:
  const DiffusionModel* model_;
  double dt_;
  double sqrt_dt_;
  CounterStream w_stream_;
  CounterStream u_stream_;
  std::uint64_t trajectory_;
  std::uint64_t k_ = 0;
  Vector x_, y_, dy_;
  Vector drift_, h_, noise_;
  std::vector<double> b_;  // row-major n x r
};

std::size_t step_count(double horizon, double dt);

JointPath simulate_joint(const DiffusionModel& model, const GaussianInit& x0, double horizon,
                         double dt, std::uint64_t seed, std::uint64_t trajectory);

}  // namespace filterlab
