#include "filterlab/ensemble.hpp"
#include "filterlab/fokker_planck.hpp"
#include "filterlab/gaussian.hpp"
#include "filterlab/info_metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace filterlab;

TEST_CASE("entropy production rate: closed-form cases") {
  SUBCASE("OU at its steady state") {
    const DiffusionModel m = make_ou(1.0, 2.0);
    const Grid1D g = default_grid(m, 512);
    CHECK(std::abs(entropy_production_rate(m, gaussian_density(g, 0.0, 1.0))) < 1e-3);
  }
  SUBCASE("Brownian Gaussian: Sigma / 2V") {
    const DiffusionModel m = make_brownian(1.5, 0.0, 12.0);
    const Grid1D g = Grid1D::make(-12.0, 12.0, 1024);
    CHECK(entropy_production_rate(m, gaussian_density(g, 0.0, 2.0)) == doctest::Approx(1.5 / 4.0).epsilon(1e-3));
  }
}

TEST_CASE("free surprise rate") {
  const DiffusionModel m = make_ou(1.0, 2.0);
  const Grid1D g = Grid1D::make(-12.0, 12.0, 1024);
  const GridDensity ss = steady_state_grid(m, g);
  const FreeSurpriseRate zero = free_surprise_rate(m, ss, ss);
  CHECK(zero.gamma_form == 0.0);
  CHECK(std::abs(zero.flux_form) < 1e-20);

  // V = 2 against V_ss = 1: the Gaussian ledger gives -1/2
  const FreeSurpriseRate r = free_surprise_rate(m, gaussian_density(g, 0.0, 2.0), ss);
  CHECK(r.gamma_form == doctest::Approx(-0.5).epsilon(1e-3));
  CHECK(r.flux_form == doctest::Approx(-0.5).epsilon(1e-3));
  CHECK(r.gamma_form <= 1e-10);
  CHECK(r.flux_form <= 1e-10);
}

TEST_CASE("double-well: gamma and flux forms agree on a transient") {
  const DiffusionModel m = make_double_well(1.0, 0.5, 1.0);
  const GridDensity ss = steady_state_grid(m, default_grid(m, 512));
  GridDensity rho = gaussian_density(ss.grid, 0.2, 0.25);
  rho = fp_advance(m, rho, 0.3);
  const FreeSurpriseRate r = free_surprise_rate(m, rho, ss);
  CHECK(r.gamma_form < 0.0);
  CHECK(std::abs(r.gamma_form - r.flux_form) < 1e-3 * std::abs(r.gamma_form));
}

TEST_CASE("unconditional Fisher trace") {
  const Grid1D g = Grid1D::make(-10.0, 10.0, 1024);
  CHECK(fisher_trace_unconditional(make_ou(1.0, 2.0), gaussian_density(g, 0.0, 1.0)) ==
        doctest::Approx(2.0).epsilon(1e-3));
  CHECK(fisher_trace_unconditional(make_ou(1.0, 1.0), gaussian_density(g, 0.0, 0.5)) ==
        doctest::Approx(2.0).epsilon(1e-3));
  // a X has trace scaled by 1/a^2
  const DiffusionModel m = make_brownian(1.0, 0.0, 10.0);
  const double j1 = fisher_trace_unconditional(m, gaussian_density(g, 0.0, 0.5));
  const double j2 = fisher_trace_unconditional(m, gaussian_density(g, 0.0, 0.5 * 4.0));
  CHECK(j2 == doctest::Approx(j1 / 4.0).epsilon(1e-3));
}

TEST_CASE("Cramer-Rao gap") {
  const Grid1D g = Grid1D::make(-10.0, 10.0, 1024);
  CHECK(std::abs(cramer_rao_gap(gaussian_density(g, 1.0, 0.7))) < 1e-6);
  GridDensity mix = gaussian_density(g, -2.0, 0.3);
  const GridDensity b = gaussian_density(g, 2.0, 0.3);
  for (std::size_t i = 0; i < g.n_cells; ++i) mix.values[i] = 0.5 * (mix.values[i] + b.values[i]);
  CHECK(cramer_rao_gap(mix) > 1.0);
}

TEST_CASE("de Bruijn on a coarse grid") {
  const std::vector<double> ts{0.2, 0.5, 1.0};
  const DeBruijnResult r = de_bruijn_check(0.25, ts);
  CHECK(r.max_deviation < 1e-3);
  for (std::size_t i = 0; i < ts.size(); ++i)
    CHECK(r.half_trJ[i] == doctest::Approx(0.5 / (0.25 + ts[i])).epsilon(1e-3));
}

namespace {

EnsembleConfig lqg_ensemble(double c, std::size_t n) {
  LinearModel lm;
  lm.A = Matrix::Constant(1, 1, -1.0);
  lm.B = Matrix::Constant(1, 1, std::sqrt(2.0));
  lm.C = Matrix::Constant(1, 1, c);
  EnsembleConfig ec;
  ec.model = make_lqg(lm);
  ec.grid = default_grid(ec.model, 256);
  ec.x0 = GaussianInit{Vector::Zero(1), Matrix::Constant(1, 1, 1.0)};
  ec.dt = 1e-3;
  ec.horizon = 1.0;
  ec.trajectories = n;
  ec.seed = 2024;
  ec.sample_stride = 100;
  ec.keep_final_posteriors = true;
  return ec;
}

bool within(const Estimate& e, double target, double k = 3.0) { return std::abs(e.value - target) <= k * e.se; }

}  // namespace

TEST_CASE("LQG ensemble estimators against the Kalman-Bucy closed forms") {
  const EnsembleConfig ec = lqg_ensemble(1.0, 300);
  const EnsembleRun run = run_ensemble(ec);
  const GridDensity ss = steady_state_grid(ec.model, ec.grid);
  const InfoLedger ledger = build_ledger(run, &ss, 2);
  LinearModel lm;
  lm.A = Matrix::Constant(1, 1, -1.0);
  lm.B = Matrix::Constant(1, 1, std::sqrt(2.0));
  lm.C = Matrix::Constant(1, 1, 1.0);
  const auto Vh = riccati_trajectory(lm, Matrix::Constant(1, 1, 1.0), 1e-3, 1000);
  CHECK(ledger.valid);
  CHECK(std::abs(ledger.rows[0].I_mc.value) < 1e-12);
  for (const LedgerRow& r : ledger.rows) {
    if (r.t == 0.0) continue;
    const double v = Vh[static_cast<std::size_t>(std::lround(r.t / 1e-3))](0, 0);  // prior V stays 1
    CAPTURE(r.t);
    CHECK(within(r.S_rate, 0.5 * v));
    CHECK(within(r.trJ_pi, 2.0 / v));
    CHECK(within(r.D_fisher, 0.5 * 2.0 * (1.0 / v - 1.0)));
    CHECK(within(r.D_gamma, 0.5 * 2.0 * (1.0 / v - 1.0)));
    CHECK(within(r.I_mc, 0.5 * std::log(1.0 / v)));
    CHECK(std::abs(r.mwz.value) <= 3.0 * r.mwz.se);
    CHECK(r.identity_gap <= 1e-10);
    CHECK(std::abs(r.I_mc.value - r.I_zakai.value) <= 3.0 * std::hypot(r.I_mc.se, r.I_zakai.se));
    CHECK(r.trJ_rho == doctest::Approx(2.0).epsilon(2e-3));
  }
  const TowerCheck t1 = tower_property(run, 50), t2 = tower_property(run, 50);
  CHECK(t1.l1 == t2.l1);
  CHECK(t1.l1_se == t2.l1_se);
  CHECK(t1.l1 <= 3.0 * t1.l1_se);
}

TEST_CASE("uninformative observations: no supplied or dissipated information") {
  const EnsembleConfig ec = lqg_ensemble(0.0, 100);
  const EnsembleRun run = run_ensemble(ec);
  const InfoLedger ledger = build_ledger(run, nullptr, 2);
  for (const LedgerRow& r : ledger.rows) {
    CHECK(r.S_rate.value == 0.0);
    // rhohat and rho follow the same steps here, so D is zero up to round-off
    CHECK(std::abs(r.D_gamma.value) <= 3.0 * r.D_gamma.se + 1e-12);
    CHECK(std::abs(r.D_fisher.value) <= 3.0 * r.D_fisher.se + 1e-12);
    CHECK(std::abs(r.trJ_pi.value - r.trJ_rho) <= 3.0 * r.trJ_pi.se + 1e-9);
    CHECK(std::isnan(r.F));
  }
}

TEST_CASE("score from zeta equals score from rhohat") {
  const Grid1D g = Grid1D::make(-6.0, 6.0, 256);
  GridDensity rho = gaussian_density(g, 0.2, 0.8);
  GridDensity zeta = rho;
  for (double& v : zeta.values) v *= 17.5;
  const auto a = score_field(rho), b = score_field(zeta);
  for (std::size_t i = 0; i < g.n_cells; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * (1.0 + std::abs(a[i])));
}
