#pragma once

#include "filterlab/diffusion.hpp"
#include "filterlab/grid.hpp"

#include <vector>

namespace filterlab {

// Per-face data that does not depend on the drift: positions, D = Sigma/2
// and the correction 1/2 dSigma/dx. Faces f = 0..n; 0 and n are walls.
struct FaceGeometry {
  Grid1D grid;
  std::vector<double> x;
  std::vector<double> diffusion;
  std::vector<double> drift_correction;

  static FaceGeometry make(const DiffusionModel& model, const Grid1D& grid);
};

// Finite-volume generator for d rho/dt = -dJ/dx with
//   J = v rho - 1/2 d(Sigma rho)/dx = u rho - 1/2 Sigma d rho/dx
// and zero flux through both walls. Interior face fluxes use the
// Scharfetter-Gummel exponential fit
//   J_f = a_f rho_{f-1} - b_f rho_f,  a_f = (D/dx) B(-Pe), b_f = (D/dx) B(Pe),
// with D = Sigma/2, Pe = u dx / D and B(z) = z / (e^z - 1); a_f, b_f >= 0.
class FluxOperator {
 public:
  FluxOperator(const DiffusionModel& model, const Grid1D& grid, ConstSpan control = {});
  // face_drift[f] = v(x_f) for f = 0..n (e.g. an ensemble mean drift).
  FluxOperator(const FaceGeometry& faces, std::span<const double> face_drift);

  const Grid1D& grid() const { return grid_; }
  // Largest explicit step that keeps the update a convex combination.
  double stable_dt() const { return stable_dt_; }
  const std::vector<double>& face_velocity() const { return face_u_; }

  // One forward-Euler step; no stability check.
  void euler_step(std::span<double> values, double dt) const;
  // Sub-cycles dt into equal steps no larger than safety * stable_dt().
  void advance(std::span<double> values, double dt, double safety = 0.9) const;
  std::size_t substeps(double dt, double safety = 0.9) const;
  // Discrete flux J_f at faces 0..n (zero at the walls).
  std::vector<double> face_flux(std::span<const double> values) const;

 private:
  void build(const FaceGeometry& faces, std::span<const double> face_drift);

  Grid1D grid_;
  std::vector<double> face_u_;
  std::vector<double> a_, b_;
  double stable_dt_ = 0.0;
};

// Drift v(x_f, control) at every face.
std::vector<double> face_drift(const DiffusionModel& model, const FaceGeometry& faces,
                               ConstSpan control = {});

// Single explicit step. Throws NumericalError before stepping if
// dt > stable_dt (CFL), and "unstable step" if a value drops below
// -1e-14 * max (smaller negatives are clipped to 0).
GridDensity fp_step(const DiffusionModel& model, const GridDensity& rho, double dt,
                    ConstSpan control = {});

// Sub-cycled propagation over dt.
GridDensity fp_advance(const DiffusionModel& model, const GridDensity& rho, double dt,
                       ConstSpan control = {});

// Clips tiny negative round-off; throws NumericalError("unstable step")
// below -1e-14 * max.
void clip_negative(std::span<double> values);

struct SteadyStateOptions {
  double max_time = 200.0;
  double tolerance = 1e-10;  // sup-norm change per unit time
};

// Stationary density on the grid. With constant Sigma, ln rho_ss is the
// midpoint quadrature of 2 v / Sigma (the discrete zero-flux state of the
// operator above); otherwise fp steps are iterated to the tolerance.
GridDensity steady_state_grid(const DiffusionModel& model, const Grid1D& grid,
                              const SteadyStateOptions& options = {});

// Default grid box: stationary mean +- 6 stationary standard deviations
// for Gaussian presets, the model's declared domain otherwise.
Grid1D default_grid(const DiffusionModel& model, std::size_t n_cells = 512);

}  // namespace filterlab
