#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace filterlab {

// Uniform cell-centred grid on [x_min, x_max].
struct Grid1D {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t n_cells = 16;

  static Grid1D make(double x_min, double x_max, std::size_t n_cells);

  double dx() const { return (x_max - x_min) / static_cast<double>(n_cells); }
  double center(std::size_t i) const { return x_min + (static_cast<double>(i) + 0.5) * dx(); }
  // Face f sits between cells f-1 and f; faces 0 and n_cells are the walls.
  double face(std::size_t f) const { return x_min + static_cast<double>(f) * dx(); }
  std::vector<double> centers() const;

  bool operator==(const Grid1D&) const = default;
};

// Non-negative cell values. For a Zakai density the represented function
// is values * exp(log_norm); log_norm accumulates ln sigma_t(1).
struct GridDensity {
  Grid1D grid;
  std::vector<double> values;
  bool normalized = false;
  double log_norm = 0.0;
};

inline constexpr double kDensityFloor = 1e-300;
inline constexpr double kScoreGate = 1e-12;

// Cell quadrature sum_i values_i dx; the finite-volume scheme conserves it
// exactly.
double mass(const GridDensity& rho);
double integrate(const Grid1D& grid, std::span<const double> values);
double mean(const GridDensity& rho);
double variance(const GridDensity& rho);

GridDensity gaussian_density(const Grid1D& grid, double mean, double variance);
GridDensity uniform_density(const Grid1D& grid);

// -int rho ln rho with 0 ln 0 = 0.
double entropy(const GridDensity& rho);

// d/dx ln rho at cell centres (central differences, one-sided at the
// walls) on ln(max(rho, floor)). The log_norm offset cancels and is ignored.
std::vector<double> score_field(const GridDensity& rho);

// Linear interpolation between cell centres; constant in the half cells
// next to the walls and 0 outside the box.
double eval_at(const GridDensity& rho, double x);
double interpolate(const Grid1D& grid, std::span<const double> field, double x);
// ln of the represented (possibly unnormalized) density at x.
double log_density_at(const GridDensity& rho, double x);

struct KlDivergence {
  double value = 0.0;
  bool infinite = false;  // p > 0 somewhere q == 0
};
KlDivergence kl_against(const GridDensity& p, const GridDensity& q);

// Gate for score integrands: rho_i > kScoreGate * max rho.
std::vector<char> score_support(const GridDensity& rho);

}  // namespace filterlab
