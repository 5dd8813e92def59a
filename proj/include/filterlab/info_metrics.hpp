#pragma once

#include "filterlab/diffusion.hpp"
#include "filterlab/ensemble.hpp"
#include "filterlab/grid.hpp"

#include <cstdint>
#include <vector>

namespace filterlab {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// Mean and standard error (sample sd / sqrt(N)).
Estimate mean_se(std::span<const double> xs);

// ---- density functionals -------------------------------------------------
// face_drift (optional) overrides v at the faces, e.g. a mean drift under
// feedback; div u is taken as the face difference of u = v - 1/2 Sigma'.

// int rho div u.
double mean_divergence(const DiffusionModel& model, const GridDensity& rho,
                       std::span<const double> face_drift = {});

// dH/dt = E[div u] + 1/2 E[Gamma(ln rho, ln rho)].
double entropy_production_rate(const DiffusionModel& model, const GridDensity& rho,
                               std::span<const double> face_drift = {});

struct FreeSurpriseRate {
  double gamma_form = 0.0;  // -1/2 E[Sigma (d ln(rho/rho_ss))^2]
  double flux_form = 0.0;   // -2 int J^2 / (Sigma rho)
};
// Throws NumericalError if Sigma vanishes where rho is supported.
FreeSurpriseRate free_surprise_rate(const DiffusionModel& model, const GridDensity& rho,
                                    const GridDensity& rho_ss);

// dF/dt = int J d/dx ln(rho/rho_ss) for an arbitrary drift (used under
// feedback, where rho_ss is no longer stationary for the flow).
double free_surprise_rate_general(const DiffusionModel& model, const GridDensity& rho,
                                  const GridDensity& rho_ss, std::span<const double> face_drift);

// tr J^rho = int rho Sigma (d ln rho)^2 on the score support.
double fisher_trace_unconditional(const DiffusionModel& model, const GridDensity& rho);

// Cov - J^-1 with identity weighting (1D: a scalar). Throws if J = 0.
double cramer_rao_gap(const GridDensity& rho);

// ---- ensemble estimators at one sample ---------------------------------
// Excluded trajectories are dropped from every estimator.
Estimate fisher_trace_conditional(const EnsembleSample& s);
Estimate supplied_rate(const EnsembleSample& s);

struct DissipatedRate {
  Estimate fisher_form;  // 1/2 (tr J^pi - tr J^rho), SE from J^pi
  Estimate gamma_form;   // 1/2 E[Sigma (d ln(rhohat/rho))^2]
};
DissipatedRate dissipated_rate(const DiffusionModel& model, const EnsembleSample& s);

struct MutualInformation {
  Estimate mc;             // E ln(rhohat / rho) at the truth
  Estimate zakai;          // E ln(zeta / rho) - int 1/2 E|pi(h)|^2
  double identity_gap = 0.0;  // max_k |ln rhohat - (ln zeta - ln sigma(1))|
};
MutualInformation mutual_information(const EnsembleSample& s);

// ---- ledger --------------------------------------------------------------
struct LedgerRow {
  double t = 0.0;
  double H = 0.0;
  double dH_dt = 0.0;
  double F = 0.0;
  double dF_dt = 0.0;
  double div_u = 0.0;  // E[div u] under the prior
  double trJ_rho = 0.0;
  Estimate trJ_pi;
  Estimate S_rate;
  Estimate D_fisher;
  Estimate D_gamma;
  Estimate I_mc;
  Estimate I_zakai;
  Estimate mwz;  // finite-difference dI/dt minus window-averaged S - D
  double identity_gap = 0.0;
  std::size_t excluded = 0;
};

struct InfoLedger {
  std::vector<LedgerRow> rows;
  std::size_t trajectories = 0;
  double dt = 0.0;
  Grid1D grid;
  std::uint64_t seed = 0;
  std::size_t max_excluded = 0;
  bool valid = true;  // false when more than 0.1% of trajectories were excluded
};

// window = samples on each side of t for dI/dt (2 gives the 5-sample
// stencil); clipped one-sided near the ends. rho_ss may be null, in which
// case F and dF_dt are NaN.
InfoLedger build_ledger(const EnsembleRun& run, const GridDensity* rho_ss, std::size_t window = 2);

// dH(X|Y)/dt = 1/2 tr J^pi + E[div u] - S_rate.
Estimate conditional_entropy_rate(const LedgerRow& row);

// ---- stand-alone checks --------------------------------------------------
struct DeBruijnOptions {
  std::size_t n_cells = 512;
  double half_width = 9.0;
  double dt = 1e-4;
  double diffusion = 1.0;
};

struct DeBruijnResult {
  std::vector<double> times;
  std::vector<double> dH_dt;      // centred difference of the grid entropy
  std::vector<double> half_trJ;   // 1/2 Sigma J^rho
  double max_deviation = 0.0;
};

// Brownian motion from N(0, V0); t_grid must be increasing and > 0.
DeBruijnResult de_bruijn_check(double V0, std::span<const double> t_grid,
                               const DeBruijnOptions& options = {});

struct TowerCheck {
  double l1 = 0.0;        // int |mean_k rhohat_k - rho|
  double l1_se = 0.0;     // int SE_i over cells (bootstrap per-cell SE)
  std::size_t resamples = 0;
};

// Bootstrap over trajectories with the bootstrap RNG channel.
TowerCheck tower_property(const EnsembleRun& run, std::size_t resamples = 200);

}  // namespace filterlab
