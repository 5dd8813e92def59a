#include "filterlab/fokker_planck.hpp"

#include "filterlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace filterlab {

namespace {

// Scharfetter-Gummel weights (D/dx) B(-Pe) and (D/dx) B(Pe), B(z) = z / (e^z - 1).
// B(-z) = B(z) + z, so one expm1 gives both; the larger one is derived from
// the smaller to avoid cancellation.
inline void sg_weights(double u, double d, double dx, double& a, double& b) {
  if (d <= 0.0) {
    a = std::max(u, 0.0);
    b = std::max(-u, 0.0);
    return;
  }
  const double pe = u * dx / d;
  if (std::abs(pe) < 1e-8) {
    a = (d / dx) * (1.0 + 0.5 * pe);
    b = (d / dx) * (1.0 - 0.5 * pe);
  } else if (pe > 0.0) {
    b = u / std::expm1(pe);
    a = b + u;
  } else {
    a = -u / std::expm1(-pe);
    b = a - u;
  }
}

}  // namespace

FaceGeometry FaceGeometry::make(const DiffusionModel& model, const Grid1D& grid) {
  if (model.dim_state != 1) throw ConfigError("grid solvers support one-dimensional states only");
  FaceGeometry g;
  g.grid = grid;
  const std::size_t n = grid.n_cells;
  g.x.resize(n + 1);
  g.diffusion.resize(n + 1);
  g.drift_correction.resize(n + 1);
  for (std::size_t f = 0; f <= n; ++f) {
    g.x[f] = grid.face(f);
    g.diffusion[f] = 0.5 * sigma_1d(model, g.x[f]);
    g.drift_correction[f] = 0.5 * sigma_gradient_1d(model, g.x[f]);
  }
  return g;
}

std::vector<double> face_drift(const DiffusionModel& model, const FaceGeometry& faces,
                               ConstSpan control) {
  std::vector<double> v(faces.x.size());
  for (std::size_t f = 0; f < v.size(); ++f) v[f] = drift_1d(model, faces.x[f], control);
  return v;
}

FluxOperator::FluxOperator(const DiffusionModel& model, const Grid1D& grid, ConstSpan control) {
  const FaceGeometry faces = FaceGeometry::make(model, grid);
  build(faces, face_drift(model, faces, control));
}

FluxOperator::FluxOperator(const FaceGeometry& faces, std::span<const double> drift) {
  build(faces, drift);
}

void FluxOperator::build(const FaceGeometry& faces, std::span<const double> drift) {
  grid_ = faces.grid;
  const std::size_t n = grid_.n_cells;
  if (drift.size() != n + 1) throw ConfigError("FluxOperator: need one drift value per face");
  const double dx = grid_.dx();
  face_u_.assign(n + 1, 0.0);
  a_.assign(n + 1, 0.0);
  b_.assign(n + 1, 0.0);
  for (std::size_t f = 1; f < n; ++f) {
    const double u = drift[f] - faces.drift_correction[f];
    const double d = faces.diffusion[f];
    face_u_[f] = u;
    sg_weights(u, d, dx, a_[f], b_[f]);
    if (!std::isfinite(a_[f]) || !std::isfinite(b_[f]))
      throw NumericalError("FluxOperator: non-finite face coefficient");
  }
  double max_rate = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_rate = std::max(max_rate, a_[i + 1] + b_[i]);
  stable_dt_ = max_rate > 0.0 ? dx / max_rate : std::numeric_limits<double>::infinity();
}

void FluxOperator::euler_step(std::span<double> rho, double dt) const {
  const std::size_t n = grid_.n_cells;
  const double lambda = dt / grid_.dx();
  const double* a = a_.data();
  const double* b = b_.data();
  double* r = rho.data();
  double left = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double right = a[i + 1] * r[i] - b[i + 1] * r[i + 1];
    r[i] -= lambda * (right - left);
    left = right;
  }
  r[n - 1] += lambda * left;
}

std::size_t FluxOperator::substeps(double dt, double safety) const {
  if (!std::isfinite(stable_dt_)) return 1;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dt / (safety * stable_dt_))));
}

std::vector<double> FluxOperator::face_flux(std::span<const double> values) const {
  const std::size_t n = grid_.n_cells;
  std::vector<double> j(n + 1, 0.0);
  for (std::size_t f = 1; f < n; ++f) j[f] = a_[f] * values[f - 1] - b_[f] * values[f];
  return j;
}

void FluxOperator::advance(std::span<double> values, double dt, double safety) const {
  const std::size_t m = substeps(dt, safety);
  const double h = dt / static_cast<double>(m);
  for (std::size_t s = 0; s < m; ++s) euler_step(values, h);
}

void clip_negative(std::span<double> values) {
  double peak = 0.0;
  bool negative = false;
  for (double v : values) {
    peak = std::max(peak, v);
    negative |= v < 0.0;
  }
  if (!negative) return;
  for (double& v : values) {
    if (v >= 0.0) continue;
    if (v < -1e-14 * peak) {
      std::ostringstream msg;
      msg << "unstable step: density value " << v << " (max " << peak << ")";
      throw NumericalError(msg.str());
    }
    v = 0.0;
  }
}

GridDensity fp_step(const DiffusionModel& model, const GridDensity& rho, double dt,
                    ConstSpan control) {
  if (!(dt > 0.0)) throw ConfigError("fp_step: dt must be positive");
  const FluxOperator op(model, rho.grid, control);
  if (dt > op.stable_dt()) {
    std::ostringstream msg;
    msg << "fp_step: CFL violation, dt=" << dt << " exceeds stable step " << op.stable_dt();
    throw NumericalError(msg.str());
  }
  GridDensity out = rho;
  op.euler_step(out.values, dt);
  clip_negative(out.values);
  return out;
}

GridDensity fp_advance(const DiffusionModel& model, const GridDensity& rho, double dt,
                       ConstSpan control) {
  if (!(dt > 0.0)) throw ConfigError("fp_advance: dt must be positive");
  const FluxOperator op(model, rho.grid, control);
  GridDensity out = rho;
  op.advance(out.values, dt);
  clip_negative(out.values);
  return out;
}

GridDensity steady_state_grid(const DiffusionModel& model, const Grid1D& grid,
                              const SteadyStateOptions& options) {
  if (!model.has_steady_state)
    throw ConfigError("steady_state_grid: model '" + model.name + "' declares no steady state");
  const FaceGeometry faces = FaceGeometry::make(model, grid);
  const FluxOperator op(faces, face_drift(model, faces));
  const std::size_t n = grid.n_cells;
  const double dx = grid.dx();

  bool positive_diffusion = true;
  for (std::size_t f = 1; f < n; ++f) positive_diffusion &= faces.diffusion[f] > 0.0;

  GridDensity rho{grid, std::vector<double>(n, 1.0), true, 0.0};
  if (positive_diffusion) {
    // Zero flux at every face: ln rho_f - ln rho_{f-1} = u_f dx / D_f.
    std::vector<double> log_rho(n, 0.0);
    for (std::size_t f = 1; f < n; ++f)
      log_rho[f] = log_rho[f - 1] + op.face_velocity()[f] * dx / faces.diffusion[f];
    const double top = *std::max_element(log_rho.begin(), log_rho.end());
    for (std::size_t i = 0; i < n; ++i) rho.values[i] = std::exp(log_rho[i] - top);
  }
  double m = mass(rho);
  for (double& v : rho.values) v /= m;
  if (model.constant_diffusion && positive_diffusion) return rho;

  const double h = 0.9 * op.stable_dt();
  const std::size_t check_every = 64;
  std::vector<double> previous = rho.values;
  for (double t = 0.0; t < options.max_time; t += h * static_cast<double>(check_every)) {
    for (std::size_t s = 0; s < check_every; ++s) op.euler_step(rho.values, h);
    clip_negative(rho.values);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      change = std::max(change, std::abs(rho.values[i] - previous[i]));
    if (change / (h * static_cast<double>(check_every)) < options.tolerance) {
      m = mass(rho);
      for (double& v : rho.values) v /= m;
      return rho;
    }
    previous = rho.values;
  }
  throw NumericalError("steady_state_grid: no convergence within max_time");
}

Grid1D default_grid(const DiffusionModel& model, std::size_t n_cells) {
  if (model.domain.lower.size() != 1) throw ConfigError("default_grid: model must be 1D");
  return Grid1D::make(model.domain.lower(0), model.domain.upper(0), n_cells);
}

}  // namespace filterlab
