#include "filterlab/grid.hpp"

#include "filterlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace filterlab {

Grid1D Grid1D::make(double x_min, double x_max, std::size_t n_cells) {
  if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max))
    throw ConfigError("grid: x_max must exceed x_min");
  if (n_cells < 16) throw ConfigError("grid: need at least 16 cells");
  return Grid1D{x_min, x_max, n_cells};
}

std::vector<double> Grid1D::centers() const {
  std::vector<double> c(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) c[i] = center(i);
  return c;
}

double integrate(const Grid1D& grid, std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s * grid.dx();
}

double mass(const GridDensity& rho) { return integrate(rho.grid, rho.values); }

double mean(const GridDensity& rho) {
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t i = 0; i < rho.values.size(); ++i) {
    m0 += rho.values[i];
    m1 += rho.values[i] * rho.grid.center(i);
  }
  return m1 / m0;
}

double variance(const GridDensity& rho) {
  const double mu = mean(rho);
  double m0 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < rho.values.size(); ++i) {
    const double d = rho.grid.center(i) - mu;
    m0 += rho.values[i];
    m2 += rho.values[i] * d * d;
  }
  return m2 / m0;
}

GridDensity gaussian_density(const Grid1D& grid, double mu, double var) {
  if (!(var > 0.0)) throw ConfigError("gaussian_density: variance must be positive");
  GridDensity rho{grid, std::vector<double>(grid.n_cells), true, 0.0};
  for (std::size_t i = 0; i < grid.n_cells; ++i) {
    const double d = grid.center(i) - mu;
    rho.values[i] = std::exp(-0.5 * d * d / var);
  }
  const double m = mass(rho);
  for (double& v : rho.values) v /= m;
  return rho;
}

GridDensity uniform_density(const Grid1D& grid) {
  const double v = 1.0 / (grid.x_max - grid.x_min);
  return GridDensity{grid, std::vector<double>(grid.n_cells, v), true, 0.0};
}

double entropy(const GridDensity& rho) {
  double s = 0.0;
  for (double v : rho.values)
    if (v > 0.0) s -= v * std::log(v);
  return s * rho.grid.dx();
}

std::vector<double> score_field(const GridDensity& rho) {
  const std::size_t n = rho.values.size();
  std::vector<double> logs(n), score(n);
  for (std::size_t i = 0; i < n; ++i)
    logs[i] = std::log(std::max(rho.values[i], kDensityFloor));
  const double dx = rho.grid.dx();
  score[0] = (logs[1] - logs[0]) / dx;
  score[n - 1] = (logs[n - 1] - logs[n - 2]) / dx;
  for (std::size_t i = 1; i + 1 < n; ++i) score[i] = (logs[i + 1] - logs[i - 1]) / (2.0 * dx);
  return score;
}

double interpolate(const Grid1D& grid, std::span<const double> field, double x) {
  if (!(x >= grid.x_min && x <= grid.x_max)) return 0.0;
  const double s = (x - grid.x_min) / grid.dx() - 0.5;
  const std::size_t n = grid.n_cells;
  if (s <= 0.0) return field[0];
  if (s >= static_cast<double>(n - 1)) return field[n - 1];
  const auto i = static_cast<std::size_t>(s);
  const double w = s - static_cast<double>(i);
  return (1.0 - w) * field[i] + w * field[i + 1];
}

double eval_at(const GridDensity& rho, double x) { return interpolate(rho.grid, rho.values, x); }

double log_density_at(const GridDensity& rho, double x) {
  return std::log(std::max(eval_at(rho, x), kDensityFloor)) + rho.log_norm;
}

KlDivergence kl_against(const GridDensity& p, const GridDensity& q) {
  if (!(p.grid == q.grid)) throw ConfigError("kl_against: densities live on different grids");
  KlDivergence out;
  double s = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double a = p.values[i], b = q.values[i];
    if (a <= 0.0) continue;
    if (b <= 0.0) {
      out.infinite = true;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    s += a * std::log(a / b);
  }
  out.value = s * p.grid.dx();
  return out;
}

std::vector<char> score_support(const GridDensity& rho) {
  const double peak = *std::max_element(rho.values.begin(), rho.values.end());
  std::vector<char> keep(rho.values.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = rho.values[i] > kScoreGate * peak;
  return keep;
}

}  // namespace filterlab
