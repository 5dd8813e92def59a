#include "filterlab/ensemble.hpp"

#include "filterlab/errors.hpp"
#include "filterlab/fokker_planck.hpp"
#include "filterlab/parallel.hpp"
#include "filterlab/zakai.hpp"

#include <cmath>
#include <cstring>
#include <memory>
#include <optional>

namespace filterlab {

namespace {

struct Trajectory {
  JointStepper stepper;
  std::vector<double> post;
  double log_norm = 0.0;
  double half_pi_sq = 0.0;
  Vector pi;
  Vector beta;
  bool has_beta = false;
  std::size_t clamped = 0;
  std::vector<double> face_v;
  std::optional<FluxOperator> op;
};

void moments(std::span<const double> values, const Grid1D& grid, double& m, double& v) {
  const double dx = grid.dx();
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) m1 += values[i] * grid.center(i);
  m1 *= dx;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = grid.center(i) - m1;
    m2 += values[i] * d * d;
  }
  m = m1;
  v = m2 * dx;
}

bool same_bits(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (std::memcmp(&a(i), &b(i), sizeof(double)) != 0) return false;
  return true;
}

}  // namespace

EnsembleRun run_ensemble(const EnsembleConfig& config) {
  const DiffusionModel& model = config.model;
  if (model.dim_state != 1) throw ConfigError("ensemble: grid filters need a 1D state");
  if (config.trajectories == 0) throw ConfigError("ensemble: need at least one trajectory");
  if (config.sample_stride == 0) throw ConfigError("ensemble: sample stride must be positive");
  if (config.x0.mean.size() != 1 || config.x0.cov.size() != 1 || !(config.x0.cov(0, 0) > 0.0))
    throw ConfigError("ensemble: initial law must be a 1D Gaussian with positive variance");
  const std::size_t steps = step_count(config.horizon, config.dt);
  const double dt = config.dt;
  const Grid1D& grid = config.grid;
  const double dx = grid.dx();
  const std::size_t n = grid.n_cells;
  const std::size_t N = config.trajectories;
  const bool controlled = static_cast<bool>(config.control);

  EnsembleRun run;
  run.model = model;
  run.grid = grid;
  run.dt = dt;
  run.horizon = config.horizon;
  run.trajectories = N;
  run.seed = config.seed;
  run.sample_stride = config.sample_stride;
  run.controlled = controlled;

  const FaceGeometry faces = FaceGeometry::make(model, grid);
  const std::vector<double> free_drift = face_drift(model, faces);
  const FluxOperator free_op(faces, free_drift);
  const bool shared_field = !model.observation_uses_y;
  const ObservationField field0 = observation_field(model, grid);

  GridDensity prior = gaussian_density(grid, config.x0.mean(0), config.x0.cov(0, 0));

  std::vector<Trajectory> traj;
  traj.reserve(N);
  for (std::size_t k = 0; k < N; ++k) {
    traj.push_back(Trajectory{JointStepper(model, config.x0.sample(config.seed, k), dt, config.seed, k),
                              prior.values, 0.0, 0.0, posterior_h(prior.values, dx, field0),
                              Vector(), false, 0, {}, std::nullopt});
  }

  const auto field_at = [&](const Vector& y) {
    return observation_field(model, grid, ConstSpan(y.data(), static_cast<std::size_t>(y.size())));
  };

  std::vector<double> prior_drift = free_drift;
  std::vector<double> num(n + 1), den(n + 1);

  for (std::size_t step = 0; step <= steps; ++step) {
    const double t = static_cast<double>(step) * dt;
    const bool sampling = step % config.sample_stride == 0;

    if (sampling) {
      EnsembleSample s;
      s.t = t;
      s.step = step;
      s.prior = prior;
      s.traj.resize(N);
      const std::vector<double> prior_score = score_field(prior);
      parallel_for(N, [&](std::size_t k) {
        const Trajectory& tr = traj[k];
        TrajectorySample& r = s.traj[k];
        const double x = tr.stepper.state()(0);
        r.x = x;
        r.log_norm = tr.log_norm;
        r.half_pi_sq = tr.half_pi_sq;
        moments(tr.post, grid, r.post_mean, r.post_var);
        const GridDensity post{grid, tr.post, true, tr.log_norm};
        r.post_at_x = eval_at(post, x);
        r.prior_at_x = eval_at(prior, x);
        r.excluded = !(x >= grid.x_min && x <= grid.x_max) || !(r.post_at_x > kDensityFloor) ||
                     !(r.prior_at_x > kDensityFloor);
        r.score_post = interpolate(grid, score_field(post), x);
        r.score_prior = interpolate(grid, prior_score, x);
        r.sigma = sigma_1d(model, x);
        Vector h(model.dim_obs);
        const Vector& y = tr.stepper.observation();
        model.observation(ConstSpan(&x, 1),
                          model.observation_uses_y ? ConstSpan(y.data(), model.dim_obs) : ConstSpan{},
                          MutSpan(h.data(), model.dim_obs));
        r.supplied = 0.5 * (h - tr.pi).squaredNorm();
      });
      s.posterior_average.assign(n, 0.0);
      for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t i = 0; i < n; ++i) s.posterior_average[i] += traj[k].post[i];
        s.excluded += s.traj[k].excluded ? 1 : 0;
      }
      for (double& v : s.posterior_average) v /= static_cast<double>(N);
      run.samples.push_back(std::move(s));
    }

    // Controls from each trajectory's own posterior.
    if (controlled) {
      parallel_for(N, [&](std::size_t k) {
        Trajectory& tr = traj[k];
        PosteriorSummary summary;
        summary.t = t;
        double m = 0.0, v = 0.0;
        moments(tr.post, grid, m, v);
        summary.mean = Vector::Constant(1, m);
        summary.cov = Matrix::Constant(1, 1, v);
        summary.pi_h = tr.pi;
        ControlDecision d = config.control(t, summary);
        if (d.clamped) ++tr.clamped;
        if (!tr.has_beta || !same_bits(d.beta, tr.beta)) {
          tr.beta = std::move(d.beta);
          tr.has_beta = true;
          tr.face_v = face_drift(model, faces,
                                 ConstSpan(tr.beta.data(), static_cast<std::size_t>(tr.beta.size())));
          tr.op.emplace(faces, tr.face_v);
        }
      });
      bool all_equal = true;
      for (std::size_t k = 1; k < N && all_equal; ++k) all_equal = same_bits(traj[k].beta, traj[0].beta);
      if (all_equal) {
        prior_drift = traj[0].face_v;
      } else if (config.prior_drift == PriorDrift::ensemble_mean) {
        std::fill(num.begin(), num.end(), 0.0);
        for (std::size_t k = 0; k < N; ++k)
          for (std::size_t f = 0; f <= n; ++f) num[f] += traj[k].face_v[f];
        for (std::size_t f = 0; f <= n; ++f) prior_drift[f] = num[f] / static_cast<double>(N);
      } else {
        std::fill(num.begin(), num.end(), 0.0);
        std::fill(den.begin(), den.end(), 0.0);
        for (std::size_t k = 0; k < N; ++k) {
          const auto& v = traj[k].face_v;
          const auto& p = traj[k].post;
          for (std::size_t f = 1; f < n; ++f) {
            const double w = 0.5 * (p[f - 1] + p[f]);
            num[f] += w * v[f];
            den[f] += w;
          }
        }
        for (std::size_t f = 0; f <= n; ++f) {
          if (den[f] > 0.0) {
            prior_drift[f] = num[f] / den[f];
          } else {
            double s = 0.0;
            for (std::size_t k = 0; k < N; ++k) s += traj[k].face_v[f];
            prior_drift[f] = s / static_cast<double>(N);
          }
        }
      }
      if (sampling) {
        EnsembleSample& s = run.samples.back();
        double total = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
          s.traj[k].control = traj[k].beta.size() > 0 ? traj[k].beta(0) : 0.0;
          total += s.traj[k].control;
        }
        s.mean_control = total / static_cast<double>(N);
      }
    }
    if (sampling) run.samples.back().prior_face_drift = prior_drift;
    if (step == steps) break;

    parallel_for(N, [&](std::size_t k) {
      Trajectory& tr = traj[k];
      tr.half_pi_sq += 0.5 * tr.pi.squaredNorm() * dt;
      ObservationField local;
      const ObservationField* field = &field0;
      if (!shared_field) {
        local = field_at(tr.stepper.observation());
        field = &local;
      }
      if (controlled) {
        tr.stepper.step(ConstSpan(tr.beta.data(), static_cast<std::size_t>(tr.beta.size())));
      } else {
        tr.stepper.step();
      }
      const Vector& dy = tr.stepper.last_increment();
      const FluxOperator& op = controlled ? *tr.op : free_op;
      op.advance(tr.post, 0.5 * dt);
      clip_negative(tr.post);
      apply_likelihood(tr.post, *field, ConstSpan(dy.data(), model.dim_obs), dt);
      op.advance(tr.post, 0.5 * dt);
      clip_negative(tr.post);
      tr.log_norm += normalize_values(tr.post, dx);
      if (!shared_field) local = field_at(tr.stepper.observation());
      tr.pi = posterior_h(tr.post, dx, *field);
    });

    const FluxOperator prior_op = controlled ? FluxOperator(faces, prior_drift) : free_op;
    prior_op.advance(prior.values, 0.5 * dt);
    clip_negative(prior.values);
    prior_op.advance(prior.values, 0.5 * dt);
    clip_negative(prior.values);
  }

  for (const Trajectory& tr : traj) run.clamped += tr.clamped;
  run.final_prior = prior;
  if (config.keep_final_posteriors) {
    run.final_posteriors.reserve(N);
    for (Trajectory& tr : traj) run.final_posteriors.push_back(std::move(tr.post));
  }
  return run;
}

}  // namespace filterlab
