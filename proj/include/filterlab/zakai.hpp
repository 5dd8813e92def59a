#pragma once

#include "filterlab/diffusion.hpp"
#include "filterlab/fokker_planck.hpp"
#include "filterlab/grid.hpp"

#include <vector>

namespace filterlab {

// h evaluated at every cell centre, cell-major: h[i * p + j].
struct ObservationField {
  std::size_t dim_obs = 1;
  std::vector<double> h;

  double at(std::size_t cell, std::size_t j) const { return h[cell * dim_obs + j]; }
};

ObservationField observation_field(const DiffusionModel& model, const Grid1D& grid,
                                   ConstSpan y = {});

// zeta_i <- zeta_i exp(h_i . dY - 1/2 |h_i|^2 dt). Throws NumericalError if
// an exponent exceeds 700 or is not finite.
void apply_likelihood(std::span<double> values, const ObservationField& field, ConstSpan dy,
                      double dt);

// pi(h) for a normalized density.
Vector posterior_h(std::span<const double> values, double dx, const ObservationField& field);

// Strang step: fp_advance(dt/2), likelihood factor, fp_advance(dt/2).
// The control (if any) enters the drift; y feeds h(x, y) when the model
// uses it. The result is not normalized; log_norm is carried over.
GridDensity zakai_step(const DiffusionModel& model, const GridDensity& zeta, ConstSpan delta_y,
                       double dt, ConstSpan control = {}, ConstSpan y = {});

struct Normalized {
  GridDensity rho_hat;
  double log_mass = 0.0;
};

// Unit-mass copy; log_mass = ln(mass) is added to log_norm. A density that
// is already flagged normalized with |mass - 1| < 1e-14 is returned as is.
// Throws NumericalError("filter collapse") for non-positive mass.
Normalized normalize(const GridDensity& zeta);

// In-place variant on raw cell values; returns ln(mass).
double normalize_values(std::span<double> values, double dx);

// Kushner-Stratonovich step for the normalized density, driven by the
// innovation dI = dY - pi(h) dt. Same Strang split as zakai_step; the
// update is rho [1 + (h - pi)^T dI + 1/2 sum_jl ((h_j - pi_j)(h_l - pi_l)
// - Cov_jl)(dI_j dI_l - delta_jl dt)], which conserves mass exactly.
GridDensity ks_step(const DiffusionModel& model, const GridDensity& rho_hat, ConstSpan delta_y,
                    double dt, ConstSpan control = {}, ConstSpan y = {});

}  // namespace filterlab
