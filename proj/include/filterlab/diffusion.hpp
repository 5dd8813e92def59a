#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <string>

namespace filterlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

struct DerivativeConfig {
  double step = 1e-5;  // central-difference step for v, B, Sigma derivatives
};

struct DomainBox {
  Vector lower;
  Vector upper;

  bool contains(const Vector& x, double inflate = 1.0) const;
  double width(std::size_t i) const { return upper(i) - lower(i); }
};

// Coupled state/observation system
//   dX = v(X, beta) dt + B(X) dW,   dY = h(X, Y) dt + dU.
// Callbacks write into caller-owned buffers so grid solvers can evaluate
// them at every face without allocating.
struct DiffusionModel {
  std::string name;
  std::size_t dim_state = 1;
  std::size_t dim_noise = 1;
  std::size_t dim_obs = 1;
  std::size_t dim_control = 0;

  // drift(x, control, out); control may be empty (= no control applied).
  std::function<void(ConstSpan, ConstSpan, MutSpan)> drift;
  // diffusion_factor(x, out) with out row-major n x r.
  std::function<void(ConstSpan, MutSpan)> diffusion_factor;
  // observation(x, y, out); y may be empty.
  std::function<void(ConstSpan, ConstSpan, MutSpan)> observation;

  // Optional analytic divergence (d/dx_j) Sigma^{ij}(x); central differences
  // are used when absent.
  std::function<void(ConstSpan, MutSpan)> sigma_divergence;

  DerivativeConfig derivatives;
  DomainBox domain;
  bool constant_diffusion = false;
  bool observation_uses_y = false;
  bool has_steady_state = false;
};

// Scalar function with optional analytic derivatives.
struct SmoothField {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

Vector eval_drift(const DiffusionModel& model, const Vector& x, const Vector& control = {});
Matrix eval_diffusion_factor(const DiffusionModel& model, const Vector& x);
Vector eval_observation(const DiffusionModel& model, const Vector& x, const Vector& y = {});

// Sigma(x) = B(x) B(x)^T.
Matrix sigma_at(const DiffusionModel& model, const Vector& x);

Vector field_gradient(const SmoothField& f, const Vector& x, double step);

// Co-metric Gamma(f, g)(x) = grad f^T Sigma grad g.
double gamma(const DiffusionModel& model, const SmoothField& f, const SmoothField& g,
             const Vector& x);

// (d/dx_j) Sigma^{ij}, analytic when the model provides it.
Vector sigma_divergence(const DiffusionModel& model, const Vector& x);

// u = v - 1/2 div Sigma.
Vector u_field(const DiffusionModel& model, const Vector& x, const Vector& control = {});

// div u by central differences (used by the entropy-production formula).
double u_divergence(const DiffusionModel& model, const Vector& x, const Vector& control = {});

// Scalar helpers for one-dimensional grid solvers.
double drift_1d(const DiffusionModel& model, double x, ConstSpan control = {});
double sigma_1d(const DiffusionModel& model, double x);
double sigma_gradient_1d(const DiffusionModel& model, double x);
double u_divergence_1d(const DiffusionModel& model, double x, ConstSpan control = {});

// ---- presets -------------------------------------------------------------
// All presets take the control additively in the drift, v(x, beta) = v(x) + beta,
// and observe linearly, h(x) = c x.

// v = 0, Sigma constant. No steady state; the box is [-half_width, half_width].
DiffusionModel make_brownian(double diffusion, double obs_gain = 0.0, double half_width = 10.0);

// v = -a x, Sigma constant; box = +-6 stationary standard deviations.
DiffusionModel make_ou(double rate, double diffusion, double obs_gain = 0.0);

// v = s (x - x^3), Sigma constant; the box keeps the stationary tails below
// exp(-30) relative to the modes.
DiffusionModel make_double_well(double scale, double diffusion, double obs_gain = 1.0);

// Column concatenation [B1 | B2] of two models sharing drift and observation.
DiffusionModel concatenate_noise(const DiffusionModel& first, const DiffusionModel& second);

}  // namespace filterlab
