#include "filterlab/simulate.hpp"

#include "filterlab/errors.hpp"

#include <cmath>
#include <sstream>

namespace filterlab {

Vector GaussianInit::sample(std::uint64_t seed, std::uint64_t trajectory) const {
  StreamCursor cursor(CounterStream(seed, trajectory, Channel::initial_state));
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = cursor.normal();
  if (cov.size() == 0 || cov.isZero(0.0)) return mean;
  Eigen::LDLT<Matrix> ldlt(cov);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw ConfigError("initial covariance is not positive semi-definite");
  // cov = P^T L D L^T P, so P^T L sqrt(D) z ~ N(0, cov).
  Vector scaled = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt().cwiseProduct(z);
  Vector lz = ldlt.matrixL() * scaled;
  return mean + ldlt.transpositionsP().transpose() * lz;
}

JointStepper::JointStepper(const DiffusionModel& model, Vector x0, double dt, std::uint64_t seed,
                           std::uint64_t trajectory)
    : model_(&model),
      dt_(dt),
      sqrt_dt_(std::sqrt(dt)),
      w_stream_(seed, trajectory, Channel::state_noise),
      u_stream_(seed, trajectory, Channel::observation_noise),
      trajectory_(trajectory),
      x_(std::move(x0)),
      y_(Vector::Zero(model.dim_obs)),
      dy_(Vector::Zero(model.dim_obs)),
      drift_(model.dim_state),
      h_(model.dim_obs),
      noise_(model.dim_noise),
      b_(model.dim_state * model.dim_noise) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (static_cast<std::size_t>(x_.size()) != model.dim_state)
    throw ConfigError("initial state has the wrong dimension");
}

void JointStepper::step(ConstSpan control) {
  const DiffusionModel& m = *model_;
  const std::size_t n = m.dim_state, r = m.dim_noise, p = m.dim_obs;
  const ConstSpan x{x_.data(), n};

  m.drift(x, control, {drift_.data(), n});
  m.diffusion_factor(x, b_);
  m.observation(x, m.observation_uses_y ? ConstSpan{y_.data(), p} : ConstSpan{}, {h_.data(), p});

  for (std::size_t a = 0; a < r; ++a) noise_(a) = sqrt_dt_ * w_stream_.normal(k_ * r + a);
  for (std::size_t j = 0; j < p; ++j) {
    dy_(j) = h_(j) * dt_ + sqrt_dt_ * u_stream_.normal(k_ * p + j);
    y_(j) += dy_(j);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double dw = 0.0;
    for (std::size_t a = 0; a < r; ++a) dw += b_[i * r + a] * noise_(a);
    x_(i) += drift_(i) * dt_ + dw;
  }
  ++k_;

  if (!x_.allFinite() || (m.domain.lower.size() > 0 && !m.domain.contains(x_, 10.0))) {
    std::ostringstream msg;
    msg << "trajectory " << trajectory_ << " blew up at t=" << time() << " (x=" << x_.transpose()
        << ")";
    throw NumericalError(msg.str());
  }
}

std::size_t step_count(double horizon, double dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (!(horizon >= dt)) throw ConfigError("horizon must be at least one time step");
  const double ratio = horizon / dt;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-6 * ratio)
    throw ConfigError("horizon must be an integer multiple of dt");
  return steps;
}

JointPath simulate_joint(const DiffusionModel& model, const GaussianInit& x0, double horizon,
                         double dt, std::uint64_t seed, std::uint64_t trajectory) {
  const std::size_t steps = step_count(horizon, dt);
  JointPath path;
  path.dt = dt;
  path.seed = seed;
  path.trajectory_index = trajectory;
  path.times.reserve(steps + 1);
  path.states.reserve(steps + 1);
  path.observations.reserve(steps + 1);
  path.obs_increments.reserve(steps);

  JointStepper stepper(model, x0.sample(seed, trajectory), dt, seed, trajectory);
  path.times.push_back(0.0);
  path.states.push_back(stepper.state());
  path.observations.push_back(stepper.observation());
  for (std::size_t k = 0; k < steps; ++k) {
    stepper.step();
    path.times.push_back(stepper.time());
    path.states.push_back(stepper.state());
    path.observations.push_back(stepper.observation());
    path.obs_increments.push_back(stepper.last_increment());
  }
  return path;
}

}  // namespace filterlab
