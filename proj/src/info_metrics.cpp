#include "filterlab/info_metrics.hpp"

#include "filterlab/errors.hpp"
#include "filterlab/fokker_planck.hpp"
#include "filterlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace filterlab {

Estimate mean_se(std::span<const double> xs) {
  Estimate e;
  const std::size_t n = xs.size();
  if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double s = 0.0;
  for (double x : xs) s += x;
  e.value = s / static_cast<double>(n);
  if (n < 2) return e;
  double ss = 0.0;
  for (double x : xs) ss += (x - e.value) * (x - e.value);
  e.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  return e;
}

namespace {

std::vector<double> cell_sigma(const DiffusionModel& model, const Grid1D& grid) {
  std::vector<double> s(grid.n_cells);
  for (std::size_t i = 0; i < grid.n_cells; ++i) s[i] = sigma_1d(model, grid.center(i));
  return s;
}

// Sum over gated cells of rho Sigma score^2 dx.
double weighted_score_square(const DiffusionModel& model, const GridDensity& rho) {
  const auto score = score_field(rho);
  const auto keep = score_support(rho);
  const auto sigma = cell_sigma(model, rho.grid);
  double s = 0.0;
  for (std::size_t i = 0; i < score.size(); ++i)
    if (keep[i]) s += rho.values[i] * sigma[i] * score[i] * score[i];
  return s * rho.grid.dx();
}

std::vector<double> log_ratio(const GridDensity& a, const GridDensity& b) {
  std::vector<double> r(a.values.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = std::log(std::max(a.values[i], kDensityFloor)) - std::log(std::max(b.values[i], kDensityFloor));
  return r;
}

double trapezoid_average(std::span<const double> ts, std::span<const double> ys) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) s += 0.5 * (ys[i] + ys[i + 1]) * (ts[i + 1] - ts[i]);
  return s / (ts.back() - ts.front());
}

}  // namespace

double mean_divergence(const DiffusionModel& model, const GridDensity& rho,
                       std::span<const double> face_drift_override) {
  const FaceGeometry faces = FaceGeometry::make(model, rho.grid);
  std::vector<double> v;
  if (face_drift_override.empty()) {
    v = face_drift(model, faces);
  } else {
    v.assign(face_drift_override.begin(), face_drift_override.end());
  }
  const std::size_t n = rho.grid.n_cells;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u_right = v[i + 1] - faces.drift_correction[i + 1];
    const double u_left = v[i] - faces.drift_correction[i];
    s += rho.values[i] * (u_right - u_left);
  }
  return s;  // the dx of the quadrature cancels the 1/dx of the difference
}

double entropy_production_rate(const DiffusionModel& model, const GridDensity& rho,
                               std::span<const double> face_drift) {
  return mean_divergence(model, rho, face_drift) + 0.5 * weighted_score_square(model, rho);
}

FreeSurpriseRate free_surprise_rate(const DiffusionModel& model, const GridDensity& rho,
                                    const GridDensity& rho_ss) {
  if (!(rho.grid == rho_ss.grid)) throw ConfigError("free_surprise_rate: grids differ");
  const Grid1D& grid = rho.grid;
  const std::size_t n = grid.n_cells;
  const double dx = grid.dx();
  FreeSurpriseRate out;

  const auto s = score_field(rho);
  const auto s_ss = score_field(rho_ss);
  const auto keep = score_support(rho);
  const auto keep_ss = score_support(rho_ss);
  const auto sigma = cell_sigma(model, grid);
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i] || !keep_ss[i]) continue;
    const double d = s[i] - s_ss[i];
    out.gamma_form -= 0.5 * rho.values[i] * sigma[i] * d * d;
  }
  out.gamma_form *= dx;

  const FaceGeometry faces = FaceGeometry::make(model, grid);
  const FluxOperator op(faces, face_drift(model, faces));
  const auto J = op.face_flux(rho.values);
  const double peak = *std::max_element(rho.values.begin(), rho.values.end());
  for (std::size_t f = 1; f < n; ++f) {
    const double r = 0.5 * (rho.values[f - 1] + rho.values[f]);
    if (!(r > kScoreGate * peak)) continue;
    const double sig = 2.0 * faces.diffusion[f];
    if (!(sig > 0.0)) throw NumericalError("free_surprise_rate: Sigma is singular on the support");
    out.flux_form -= 2.0 * J[f] * J[f] / (sig * r);
  }
  out.flux_form *= dx;
  return out;
}

double free_surprise_rate_general(const DiffusionModel& model, const GridDensity& rho,
                                  const GridDensity& rho_ss, std::span<const double> drift) {
  if (!(rho.grid == rho_ss.grid)) throw ConfigError("free_surprise_rate: grids differ");
  const FaceGeometry faces = FaceGeometry::make(model, rho.grid);
  const FluxOperator op = drift.empty() ? FluxOperator(faces, face_drift(model, faces))
                                        : FluxOperator(faces, drift);
  const auto J = op.face_flux(rho.values);
  const auto lr = log_ratio(rho, rho_ss);
  const auto keep = score_support(rho);
  const auto keep_ss = score_support(rho_ss);
  double s = 0.0;
  for (std::size_t f = 1; f < rho.grid.n_cells; ++f)
    if (keep[f - 1] && keep[f] && keep_ss[f - 1] && keep_ss[f]) s += J[f] * (lr[f] - lr[f - 1]);
  return s;
}

double fisher_trace_unconditional(const DiffusionModel& model, const GridDensity& rho) {
  return weighted_score_square(model, rho);
}

double cramer_rao_gap(const GridDensity& rho) {
  const auto score = score_field(rho);
  const auto keep = score_support(rho);
  const double m = mass(rho);
  double J = 0.0;
  for (std::size_t i = 0; i < score.size(); ++i)
    if (keep[i]) J += rho.values[i] * score[i] * score[i];
  J *= rho.grid.dx() / m;
  if (!(J > 0.0)) throw NumericalError("cramer_rao: Fisher information is singular");
  return variance(rho) - 1.0 / J;
}

Estimate fisher_trace_conditional(const EnsembleSample& s) {
  std::vector<double> xs;
  xs.reserve(s.traj.size());
  for (const auto& r : s.traj)
    if (!r.excluded) xs.push_back(r.sigma * r.score_post * r.score_post);
  return mean_se(xs);
}

Estimate supplied_rate(const EnsembleSample& s) {
  std::vector<double> xs;
  xs.reserve(s.traj.size());
  for (const auto& r : s.traj)
    if (!r.excluded) xs.push_back(r.supplied);
  return mean_se(xs);
}

DissipatedRate dissipated_rate(const DiffusionModel& model, const EnsembleSample& s) {
  DissipatedRate out;
  const double trJ_rho = fisher_trace_unconditional(model, s.prior);
  const Estimate trJ_pi = fisher_trace_conditional(s);
  out.fisher_form = {0.5 * (trJ_pi.value - trJ_rho), 0.5 * trJ_pi.se};
  std::vector<double> xs;
  xs.reserve(s.traj.size());
  for (const auto& r : s.traj) {
    if (r.excluded) continue;
    const double d = r.score_post - r.score_prior;
    xs.push_back(0.5 * r.sigma * d * d);
  }
  out.gamma_form = mean_se(xs);
  return out;
}

MutualInformation mutual_information(const EnsembleSample& s) {
  MutualInformation out;
  std::vector<double> mc, zk;
  mc.reserve(s.traj.size());
  zk.reserve(s.traj.size());
  for (const auto& r : s.traj) {
    if (r.excluded) continue;
    const double ln_post = std::log(r.post_at_x);
    const double ln_prior = std::log(r.prior_at_x);
    const double ln_zeta = ln_post + r.log_norm;
    mc.push_back(ln_post - ln_prior);
    zk.push_back(ln_zeta - ln_prior - r.half_pi_sq);
    out.identity_gap = std::max(out.identity_gap, std::abs(ln_post - (ln_zeta - r.log_norm)));
  }
  out.mc = mean_se(mc);
  out.zakai = mean_se(zk);
  return out;
}

InfoLedger build_ledger(const EnsembleRun& run, const GridDensity* rho_ss, std::size_t window) {
  InfoLedger ledger;
  ledger.trajectories = run.trajectories;
  ledger.dt = run.dt;
  ledger.grid = run.grid;
  ledger.seed = run.seed;
  const DiffusionModel& model = run.model;
  const std::size_t S = run.samples.size();
  const std::size_t N = run.trajectories;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  const std::vector<double> free_drift = face_drift(model, FaceGeometry::make(model, run.grid));
  std::vector<double> half_trJ_rho(S), times(S);
  ledger.rows.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    const EnsembleSample& smp = run.samples[s];
    LedgerRow& row = ledger.rows[s];
    const std::span<const double> drift(smp.prior_face_drift);
    row.t = smp.t;
    times[s] = smp.t;
    row.H = entropy(smp.prior);
    row.div_u = mean_divergence(model, smp.prior, drift);
    row.trJ_rho = fisher_trace_unconditional(model, smp.prior);
    half_trJ_rho[s] = 0.5 * row.trJ_rho;
    row.dH_dt = row.div_u + 0.5 * row.trJ_rho;
    if (rho_ss) {
      const KlDivergence kl = kl_against(smp.prior, *rho_ss);
      row.F = kl.value;
      // rho_ss is stationary only for the free drift
      const bool free = !run.controlled || (smp.prior_face_drift.size() == free_drift.size() &&
                                            std::equal(free_drift.begin(), free_drift.end(),
                                                       smp.prior_face_drift.begin()));
      row.dF_dt = free ? free_surprise_rate(model, smp.prior, *rho_ss).gamma_form
                       : free_surprise_rate_general(model, smp.prior, *rho_ss, drift);
    } else {
      row.F = nan;
      row.dF_dt = nan;
    }
    row.trJ_pi = fisher_trace_conditional(smp);
    row.S_rate = supplied_rate(smp);
    const DissipatedRate d = dissipated_rate(model, smp);
    row.D_fisher = d.fisher_form;
    row.D_gamma = d.gamma_form;
    const MutualInformation mi = mutual_information(smp);
    row.I_mc = mi.mc;
    row.I_zakai = mi.zakai;
    row.identity_gap = mi.identity_gap;
    row.excluded = smp.excluded;
    ledger.max_excluded = std::max(ledger.max_excluded, smp.excluded);
  }
  ledger.valid = static_cast<double>(ledger.max_excluded) <= 1e-3 * static_cast<double>(N);

  for (std::size_t s = 0; s < S; ++s) {
    LedgerRow& row = ledger.rows[s];
    if (S < 2) {
      row.mwz = {nan, nan};
      continue;
    }
    const std::size_t lo = s >= window ? s - window : 0;
    const std::size_t hi = std::min(S - 1, s + window);
    const std::span<const double> ts(times.data() + lo, hi - lo + 1);
    const double width = times[hi] - times[lo];
    std::vector<double> fd, sup, post, ys(hi - lo + 1);
    for (std::size_t k = 0; k < N; ++k) {
      bool ok = true;
      for (std::size_t q = lo; q <= hi && ok; ++q) ok = !run.samples[q].traj[k].excluded;
      if (!ok) continue;
      const auto& a = run.samples[lo].traj[k];
      const auto& b = run.samples[hi].traj[k];
      fd.push_back((std::log(b.post_at_x / b.prior_at_x) - std::log(a.post_at_x / a.prior_at_x)) / width);
      for (std::size_t q = lo; q <= hi; ++q) ys[q - lo] = run.samples[q].traj[k].supplied;
      sup.push_back(trapezoid_average(ts, ys));
      for (std::size_t q = lo; q <= hi; ++q) {
        const auto& r = run.samples[q].traj[k];
        ys[q - lo] = 0.5 * r.sigma * r.score_post * r.score_post;
      }
      post.push_back(trapezoid_average(ts, ys));
    }
    const Estimate e_fd = mean_se(fd), e_s = mean_se(sup), e_p = mean_se(post);
    const double rho_term =
        trapezoid_average(ts, std::span<const double>(half_trJ_rho.data() + lo, hi - lo + 1));
    row.mwz.value = e_fd.value - (e_s.value - (e_p.value - rho_term));
    row.mwz.se = std::sqrt(e_fd.se * e_fd.se + e_s.se * e_s.se + e_p.se * e_p.se);
  }
  return ledger;
}

Estimate conditional_entropy_rate(const LedgerRow& row) {
  const double v = 0.5 * row.trJ_pi.value + row.div_u - row.S_rate.value;
  const double se = std::hypot(0.5 * row.trJ_pi.se, row.S_rate.se);
  return {v, se};
}

DeBruijnResult de_bruijn_check(double V0, std::span<const double> t_grid,
                               const DeBruijnOptions& options) {
  if (!(V0 > 0.0)) throw ConfigError("de_bruijn_check: V0 must be positive");
  const DiffusionModel model = make_brownian(options.diffusion, 0.0, options.half_width);
  const Grid1D grid = Grid1D::make(-options.half_width, options.half_width, options.n_cells);
  const FluxOperator op(model, grid);
  GridDensity rho = gaussian_density(grid, 0.0, V0);
  const double h = options.dt;
  double now = 0.0;
  DeBruijnResult out;
  for (double t : t_grid) {
    if (!(t - h > now - 1e-12)) throw ConfigError("de_bruijn_check: times must increase and exceed dt");
    if (t - h > now) op.advance(rho.values, t - h - now);
    const double H_minus = entropy(rho);
    op.advance(rho.values, h);
    const double half_J = 0.5 * fisher_trace_unconditional(model, rho);
    op.advance(rho.values, h);
    const double H_plus = entropy(rho);
    now = t + h;
    const double rate = (H_plus - H_minus) / (2.0 * h);
    out.times.push_back(t);
    out.dH_dt.push_back(rate);
    out.half_trJ.push_back(half_J);
    out.max_deviation = std::max(out.max_deviation, std::abs(rate - half_J));
  }
  return out;
}

TowerCheck tower_property(const EnsembleRun& run, std::size_t resamples) {
  const auto& posts = run.final_posteriors;
  const std::size_t N = posts.size();
  if (N < 2) throw ConfigError("tower_property: run must keep at least two final posteriors");
  if (resamples < 2) throw ConfigError("tower_property: need at least two bootstrap resamples");
  const std::size_t n = run.grid.n_cells;
  const double dx = run.grid.dx();
  TowerCheck out;
  out.resamples = resamples;

  std::vector<double> avg(n, 0.0);
  for (const auto& p : posts)
    for (std::size_t i = 0; i < n; ++i) avg[i] += p[i];
  for (std::size_t i = 0; i < n; ++i) {
    avg[i] /= static_cast<double>(N);
    out.l1 += std::abs(avg[i] - run.final_prior.values[i]);
  }
  out.l1 *= dx;

  const CounterStream stream(run.seed, 0, Channel::bootstrap);
  std::vector<double> sum(n, 0.0), sumsq(n, 0.0), m(n);
  for (std::size_t b = 0; b < resamples; ++b) {
    std::fill(m.begin(), m.end(), 0.0);
    for (std::size_t j = 0; j < N; ++j) {
      const auto& p = posts[stream.bits(b * N + j) % N];
      for (std::size_t i = 0; i < n; ++i) m[i] += p[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      m[i] /= static_cast<double>(N);
      sum[i] += m[i];
      sumsq[i] += m[i] * m[i];
    }
  }
  const double B = static_cast<double>(resamples);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = sum[i] / B;
    out.l1_se += std::sqrt(std::max(0.0, (sumsq[i] / B - mu * mu) * B / (B - 1.0)));
  }
  out.l1_se *= dx;
  return out;
}

}  // namespace filterlab
