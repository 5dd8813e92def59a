#include "filterlab/zakai.hpp"

#include "filterlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace filterlab {

ObservationField observation_field(const DiffusionModel& model, const Grid1D& grid, ConstSpan y) {
  ObservationField f;
  f.dim_obs = model.dim_obs;
  f.h.resize(grid.n_cells * f.dim_obs);
  double x = 0.0;
  for (std::size_t i = 0; i < grid.n_cells; ++i) {
    x = grid.center(i);
    model.observation(ConstSpan(&x, 1), y, MutSpan(f.h.data() + i * f.dim_obs, f.dim_obs));
  }
  return f;
}

void apply_likelihood(std::span<double> values, const ObservationField& field, ConstSpan dy,
                      double dt) {
  const std::size_t p = field.dim_obs;
  if (dy.size() != p) throw ConfigError("zakai: observation increment has wrong dimension");
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double e = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double h = field.h[i * p + j];
      e += h * dy[j] - 0.5 * h * h * dt;
    }
    if (!(e <= 700.0)) {
      for (std::size_t k = 0; k < values.size(); ++k)
        for (std::size_t j = 0; j < p; ++j)
          worst = std::max(worst, std::abs(field.h[k * p + j] * dy[j]));
      std::ostringstream msg;
      msg << "zakai: likelihood exponent overflow (max |h dY| = " << worst << ")";
      throw NumericalError(msg.str());
    }
    values[i] *= std::exp(e);
  }
}

Vector posterior_h(std::span<const double> values, double dx, const ObservationField& field) {
  const std::size_t p = field.dim_obs;
  Vector pi = Vector::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < p; ++j) pi(static_cast<Eigen::Index>(j)) += values[i] * field.h[i * p + j];
  return pi * dx;
}

GridDensity zakai_step(const DiffusionModel& model, const GridDensity& zeta, ConstSpan delta_y,
                       double dt, ConstSpan control, ConstSpan y) {
  GridDensity out = fp_advance(model, zeta, 0.5 * dt, control);
  apply_likelihood(out.values, observation_field(model, zeta.grid, y), delta_y, dt);
  out = fp_advance(model, out, 0.5 * dt, control);
  out.normalized = false;
  return out;
}

double normalize_values(std::span<double> values, double dx) {
  double s = 0.0;
  for (double v : values) s += v;
  const double m = s * dx;
  if (!(m > 0.0) || !std::isfinite(m)) {
    std::ostringstream msg;
    msg << "filter collapse: posterior mass " << m;
    throw NumericalError(msg.str());
  }
  const double inv = 1.0 / m;
  for (double& v : values) v *= inv;
  return std::log(m);
}

Normalized normalize(const GridDensity& zeta) {
  const double m = mass(zeta);
  if (zeta.normalized && std::abs(m - 1.0) < 1e-14) return {zeta, 0.0};
  Normalized out{zeta, 0.0};
  out.log_mass = normalize_values(out.rho_hat.values, zeta.grid.dx());
  out.rho_hat.log_norm += out.log_mass;
  out.rho_hat.normalized = true;
  return out;
}

GridDensity ks_step(const DiffusionModel& model, const GridDensity& rho_hat, ConstSpan delta_y,
                    double dt, ConstSpan control, ConstSpan y) {
  const std::size_t p = model.dim_obs;
  if (delta_y.size() != p) throw ConfigError("ks_step: observation increment has wrong dimension");
  GridDensity out = fp_advance(model, rho_hat, 0.5 * dt, control);
  const double dx = out.grid.dx();
  normalize_values(out.values, dx);
  const ObservationField field = observation_field(model, out.grid, y);
  const Vector pi = posterior_h(out.values, dx, field);
  Matrix cov = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Vector e(static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) e(static_cast<Eigen::Index>(j)) = field.at(i, j) - pi(static_cast<Eigen::Index>(j));
    cov.noalias() += out.values[i] * dx * e * e.transpose();
  }
  Vector dI(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j)
    dI(static_cast<Eigen::Index>(j)) = delta_y[j] - pi(static_cast<Eigen::Index>(j)) * dt;
  Matrix second = dI * dI.transpose();
  second.diagonal().array() -= dt;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) e(static_cast<Eigen::Index>(j)) = field.at(i, j) - pi(static_cast<Eigen::Index>(j));
    const double quad = (e * e.transpose() - cov).cwiseProduct(second).sum();
    const double factor = 1.0 + e.dot(dI) + 0.5 * quad;
    out.values[i] = std::max(out.values[i] * factor, 0.0);
  }
  normalize_values(out.values, dx);
  out = fp_advance(model, out, 0.5 * dt, control);
  out.normalized = true;
  return out;
}

}  // namespace filterlab
