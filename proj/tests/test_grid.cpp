#include "filterlab/errors.hpp"
#include "filterlab/fokker_planck.hpp"
#include "filterlab/gaussian.hpp"
#include "filterlab/grid.hpp"
#include "filterlab/simulate.hpp"
#include "filterlab/zakai.hpp"

#include <doctest.h>

#include <cmath>

using namespace filterlab;

TEST_CASE("grid Gaussian entropy, score and KL") {
  const Grid1D g = Grid1D::make(-10.0, 10.0, 1024);
  const GridDensity rho = gaussian_density(g, 0.0, 1.0);
  CHECK(mass(rho) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(entropy(rho) - 1.4189385332046727) < 1e-4);
  CHECK(kl_against(rho, rho).value == 0.0);

  const GridDensity shifted = gaussian_density(g, 0.5, 2.0);
  const std::vector<double> s = score_field(shifted);
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < g.n_cells; ++i)
    if (std::abs(g.center(i)) < 5.0) worst = std::max(worst, std::abs(s[i] + (g.center(i) - 0.5) / 2.0));
  CHECK(worst < 1e-6);

  CHECK(eval_at(rho, 11.0) == 0.0);
  CHECK_THROWS_AS(kl_against(rho, gaussian_density(Grid1D::make(-9.0, 9.0, 1024), 0.0, 1.0)), ConfigError);
}

TEST_CASE("KL flags missing support") {
  const Grid1D g = Grid1D::make(-1.0, 1.0, 16);
  GridDensity p = uniform_density(g), q = uniform_density(g);
  q.values[3] = 0.0;
  const KlDivergence kl = kl_against(p, q);
  CHECK(kl.infinite);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(Grid1D::make(0.0, 1.0, 8), ConfigError);
  CHECK_THROWS_AS(Grid1D::make(1.0, 0.0, 64), ConfigError);
}

TEST_CASE("fp_step conserves mass and rejects CFL violations") {
  const DiffusionModel m = make_double_well(1.0, 0.5, 1.0);
  const Grid1D g = default_grid(m, 256);
  GridDensity rho = gaussian_density(g, -0.4, 0.3);
  const double dt = 0.9 * FluxOperator(m, g).stable_dt();
  for (int k = 0; k < 500; ++k) {
    const double before = mass(rho);
    rho = fp_step(m, rho, dt);
    CHECK(std::abs(mass(rho) - before) <= 1e-12 * before);
  }
  CHECK_THROWS_AS(fp_step(m, rho, 3.0 * FluxOperator(m, g).stable_dt()), NumericalError);
}

TEST_CASE("heat kernel: variance grows as V0 + t") {
  const DiffusionModel m = make_brownian(1.0, 0.0, 10.0);
  const Grid1D g = Grid1D::make(-10.0, 10.0, 512);
  GridDensity rho = gaussian_density(g, 0.0, 0.25);
  const FluxOperator op(m, g);
  op.advance(rho.values, 1.0);
  CHECK(std::abs(variance(rho) - 1.25) < 2e-3);
}

TEST_CASE("steady states") {
  SUBCASE("OU a=1, Sigma=2 has V_ss = 1") {
    const DiffusionModel m = make_ou(1.0, 2.0);
    const Grid1D g = default_grid(m, 512);
    const GridDensity ss = steady_state_grid(m, g);
    CHECK(std::abs(variance(ss) - 1.0) < 1e-3);
    CHECK(std::abs(mean(ss)) < 1e-12);
    // the analytic Gaussian barely moves under one step
    const GridDensity exact = gaussian_density(g, 0.0, 1.0);
    const GridDensity next = fp_step(m, exact, 1e-4);
    double d = 0.0;
    for (std::size_t i = 0; i < g.n_cells; ++i) d = std::max(d, std::abs(next.values[i] - exact.values[i]));
    CHECK(d < g.dx() * g.dx());
    // and the grid steady state is a fixed point
    const GridDensity again = fp_advance(m, ss, 1.0);
    double e = 0.0;
    for (std::size_t i = 0; i < g.n_cells; ++i) e = std::max(e, std::abs(again.values[i] - ss.values[i]));
    CHECK(e <= 1e-8);
  }
  SUBCASE("double well against exp(2 int v / Sigma)") {
    const double sigma = 0.5;
    const DiffusionModel m = make_double_well(1.0, sigma, 1.0);
    const Grid1D g = default_grid(m, 512);
    const GridDensity ss = steady_state_grid(m, g);
    std::vector<double> oracle(g.n_cells);
    double z = 0.0;
    for (std::size_t i = 0; i < g.n_cells; ++i) {
      const double x = g.center(i);
      oracle[i] = std::exp((x * x - 0.5 * x * x * x * x) / sigma);
      z += oracle[i] * g.dx();
    }
    double worst = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < g.n_cells; ++i) {
      worst = std::max(worst, std::abs(ss.values[i] - oracle[i] / z));
      peak = std::max(peak, oracle[i] / z);
    }
    CHECK(worst / peak < 1e-3);
  }
}

TEST_CASE("zakai_step without observations is the split Fokker-Planck step") {
  const DiffusionModel m = make_ou(1.0, 2.0, 0.0);
  const Grid1D g = default_grid(m, 256);
  const GridDensity z = gaussian_density(g, 0.3, 0.5);
  const double dy = 0.1;
  const GridDensity a = zakai_step(m, z, ConstSpan(&dy, 1), 1e-3);
  const GridDensity b = fp_advance(m, fp_advance(m, z, 5e-4), 5e-4);
  CHECK(a.values == b.values);
}

TEST_CASE("zakai_step is linear") {
  const DiffusionModel m = make_double_well(1.0, 0.5, 1.0);
  const Grid1D g = default_grid(m, 256);
  const GridDensity z1 = gaussian_density(g, -0.5, 0.2), z2 = gaussian_density(g, 0.7, 0.1);
  GridDensity mix = z1;
  for (std::size_t i = 0; i < g.n_cells; ++i) mix.values[i] = 2.0 * z1.values[i] + 0.5 * z2.values[i];
  const double dy = -0.03;
  const GridDensity l = zakai_step(m, mix, ConstSpan(&dy, 1), 1e-3);
  const GridDensity r1 = zakai_step(m, z1, ConstSpan(&dy, 1), 1e-3);
  const GridDensity r2 = zakai_step(m, z2, ConstSpan(&dy, 1), 1e-3);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    const double r = 2.0 * r1.values[i] + 0.5 * r2.values[i];
    worst = std::max(worst, std::abs(l.values[i] - r));
    scale = std::max(scale, r);
  }
  CHECK(worst <= 1e-12 * scale);
}

TEST_CASE("normalize") {
  const Grid1D g = Grid1D::make(-5.0, 5.0, 128);
  GridDensity rho = gaussian_density(g, 0.0, 1.0);
  rho.normalized = true;
  const Normalized same = normalize(rho);
  CHECK(same.log_mass == 0.0);
  CHECK(same.rho_hat.values == rho.values);

  GridDensity zeta = rho;
  for (double& v : zeta.values) v *= 3.0;
  zeta.normalized = false;
  const Normalized n = normalize(zeta);
  CHECK(n.log_mass == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(n.rho_hat.log_norm == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(mass(n.rho_hat) == doctest::Approx(1.0).epsilon(1e-14));

  GridDensity dead = rho;
  std::fill(dead.values.begin(), dead.values.end(), 0.0);
  dead.normalized = false;
  CHECK_THROWS_WITH_AS(normalize(dead), doctest::Contains("filter collapse"), NumericalError);
}

TEST_CASE("likelihood overflow reports the exponent") {
  const DiffusionModel m = make_ou(1.0, 2.0, 1.0);
  const Grid1D g = default_grid(m, 64);
  GridDensity z = gaussian_density(g, 0.0, 1.0);
  const double dy = 1e4;
  CHECK_THROWS_WITH_AS(zakai_step(m, z, ConstSpan(&dy, 1), 1e-3), doctest::Contains("h dY"), NumericalError);
}

TEST_CASE("LQG: grid Zakai tracks the Kalman-Bucy filter; ln sigma(1) bookkeeping") {
  LinearModel lm;
  lm.A = Matrix::Constant(1, 1, -1.0);
  lm.B = Matrix::Constant(1, 1, std::sqrt(2.0));
  lm.C = Matrix::Constant(1, 1, 1.0);
  const DiffusionModel m = make_lqg(lm);
  const Grid1D g = default_grid(m, 512);
  const GaussianInit init{Vector::Zero(1), Matrix::Constant(1, 1, 1.0)};
  const double dt = 1e-3;
  const JointPath path = simulate_joint(m, init, 1.0, dt, 11, 0);
  const KalmanBucyRun kb = kalman_bucy_run(lm, path, {init.mean, init.cov});
  GridDensity rho = gaussian_density(g, 0.0, 1.0);
  const ObservationField h = observation_field(m, g);
  double log_sum = 0.0, second = 0.0;
  for (std::size_t k = 0; k < path.steps(); ++k) {
    const double pi_h = posterior_h(rho.values, g.dx(), h)(0);
    const double dy = path.obs_increments[k](0);
    log_sum += pi_h * dy - 0.5 * pi_h * pi_h * dt;
    // the likelihood acts after the first half step; expanding ln E exp(h dY - h^2 dt / 2)
    // there to second order gives the remaining 1/2 Var(h) (dY^2 - dt) term
    const GridDensity half = fp_advance(m, rho, 0.5 * dt);
    const double pi_half = posterior_h(half.values, g.dx(), h)(0);
    second += (pi_half - pi_h) * dy - 0.5 * (pi_half * pi_half - pi_h * pi_h) * dt +
              0.5 * variance(half) * (dy * dy - dt);
    rho = normalize(zakai_step(m, rho, ConstSpan(&dy, 1), dt)).rho_hat;
    CHECK(std::abs(variance(rho) - kb.beliefs[k + 1].cov(0, 0)) < 5e-3);
    CHECK(std::abs(mean(rho) - kb.beliefs[k + 1].mean(0)) < 5e-3);
  }
  // the plain sum differs by a martingale of size Var(h) sqrt(T dt / 2) ...
  CHECK(std::abs(log_sum - rho.log_norm) <= 3.0 * std::sqrt(0.5 * dt));
  // ... which the second-order term removes, up to O(dt) from the dropped cumulants
  CHECK(std::abs(log_sum + second - rho.log_norm) <= dt);
}

TEST_CASE("KS step keeps unit mass") {
  const DiffusionModel m = make_double_well(1.0, 0.5, 1.0);
  const Grid1D g = default_grid(m, 256);
  GridDensity rho = gaussian_density(g, 0.0, 0.25);
  const double dy = 0.04;
  for (int k = 0; k < 50; ++k) rho = ks_step(m, rho, ConstSpan(&dy, 1), 1e-3);
  CHECK(mass(rho) == doctest::Approx(1.0).epsilon(1e-12));
}
