#include "filterlab/errors.hpp"
#include "filterlab/feedback.hpp"
#include "filterlab/fokker_planck.hpp"
#include "filterlab/runner.hpp"

#include <doctest.h>

#include <cmath>

using namespace filterlab;

namespace {

PosteriorSummary summary(double mean) {
  PosteriorSummary s;
  s.mean = Vector::Constant(1, mean);
  s.cov = Matrix::Constant(1, 1, 0.1);
  s.pi_h = s.mean;
  return s;
}

EnsembleConfig small_double_well() {
  EnsembleConfig ec;
  ec.model = make_double_well(1.0, 0.5, 1.0);
  ec.grid = default_grid(ec.model, 128);
  ec.x0 = GaussianInit{Vector::Zero(1), Matrix::Constant(1, 1, 0.25)};
  ec.dt = 1e-3;
  ec.horizon = 0.2;
  ec.trajectories = 24;
  ec.seed = 5;
  ec.sample_stride = 20;
  return ec;
}

}  // namespace

TEST_CASE("policy outputs") {
  CHECK(apply_policy(ControlPolicy::zero(), 0.0, summary(3.0)).beta(0) == 0.0);
  CHECK(apply_policy(ControlPolicy::linear_gain(1.0), 0.0, summary(0.5)).beta(0) == -0.5);
  const ControlPolicy bb = ControlPolicy::bang_bang(0.2, 1.5);
  CHECK(apply_policy(bb, 0.0, summary(0.1)).beta(0) == 0.0);
  CHECK(apply_policy(bb, 0.0, summary(0.3)).beta(0) == -1.5);
  CHECK(apply_policy(bb, 0.0, summary(-0.3)).beta(0) == 1.5);

  const ControlPolicy bounded = ControlPolicy::linear_gain(2.0, -1.0, 1.0);
  const ControlDecision d = apply_policy(bounded, 0.0, summary(4.0));
  CHECK(d.beta(0) == -1.0);
  CHECK(d.clamped);
  CHECK_FALSE(apply_policy(bounded, 0.0, summary(0.1)).clamped);
}

TEST_CASE("policy replay is pure") {
  const ControlPolicy p = ControlPolicy::linear_gain(0.7);
  for (double m : {-1.0, 0.0, 0.3, 2.0})
    CHECK(apply_policy(p, 0.1, summary(m)).beta(0) == apply_policy(p, 0.9, summary(m)).beta(0));
}

TEST_CASE("policy validation") {
  CHECK_THROWS_AS(policy_from_name("pid", 1.0, 0.0, 0.0, -1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(policy_from_name("linear_gain", 1.0, 0.0, 0.0, 1.0, 2.0), ConfigError);
  CHECK_THROWS_AS(policy_from_name("bang_bang", 0.0, -1.0, 1.0, -1.0, 1.0), ConfigError);
  CHECK(policy_from_name("linear_gain", 0.5, 0.0, 0.0, -1.0, 1.0).gain == 0.5);
}

TEST_CASE("mean drift") {
  LinearModel lm;
  lm.A = Matrix::Constant(1, 1, -1.0);
  lm.B = Matrix::Constant(1, 1, 1.0);
  lm.C = Matrix::Constant(1, 1, 1.0);
  const DiffusionModel m = make_lqg(lm);
  const std::vector<double> xs{-1.0, 0.0, 2.0};
  const std::vector<Vector> betas{Vector::Constant(1, 0.4), Vector::Constant(1, -1.0), Vector::Constant(1, 0.3)};
  const std::vector<double> v = mean_drift(m, xs, betas);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(v[i] == doctest::Approx(-xs[i] - 0.1).epsilon(1e-14));

  // open loop: every trajectory shares beta
  const std::vector<Vector> same(3, Vector::Constant(1, 0.25));
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(mean_drift(m, xs, same)[i] == -xs[i] + 0.25);

  // equal weights reduce the conditional form to the plain mean
  const std::vector<std::vector<double>> w(3, std::vector<double>(3, 0.7));
  const std::vector<double> c = conditional_mean_drift(m, xs, betas, w);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(c[i] == doctest::Approx(v[i]).epsilon(1e-14));
}

TEST_CASE("zero gain reproduces the uncontrolled ledger bit for bit") {
  const EnsembleConfig ec = small_double_well();
  const EnsembleRun plain = run_ensemble(ec);
  const GridDensity ss = steady_state_grid(ec.model, ec.grid);
  ExperimentConfig xc;
  xc.ensemble = ec;
  const ControlledLedger zero = run_controlled_experiment(ControlPolicy::zero(), xc);
  CHECK(ledger_csv(build_ledger(plain, &ss, 2)) == ledger_csv(zero.ledger));
  CHECK(plain.final_prior.values == zero.run.final_prior.values);
  for (double c : zero.mean_control) CHECK(c == 0.0);
}

TEST_CASE("logged controls are recomputable from logged posterior means") {
  ExperimentConfig xc;
  xc.ensemble = small_double_well();
  const ControlPolicy p = ControlPolicy::linear_gain(0.5);
  const ControlledLedger cl = run_controlled_experiment(p, xc);
  std::size_t checked = 0;
  for (const EnsembleSample& s : cl.run.samples) {
    double total = 0.0;
    for (const TrajectorySample& tr : s.traj) {
      CHECK(apply_policy(p, s.t, summary(tr.post_mean)).beta(0) == tr.control);
      total += tr.control;
      ++checked;
    }
    CHECK(s.mean_control == doctest::Approx(total / static_cast<double>(s.traj.size())).epsilon(1e-14));
  }
  CHECK(checked > 0);
  CHECK(cl.drift_snapshots.size() == cl.times.size());
}

TEST_CASE("closed-loop LQG: Riccati path does not see the control") {
  LinearModel lm;
  lm.A = Matrix::Constant(1, 1, -1.0);
  lm.B = Matrix::Constant(1, 1, std::sqrt(2.0));
  lm.C = Matrix::Constant(1, 1, 1.0);
  const GaussianBelief b0{Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 0.25)};
  const auto a = gaussian_feedback_run(lm, ControlPolicy::zero(), b0, 1.0, 1e-3, 50, 3);
  const auto b = gaussian_feedback_run(lm, ControlPolicy::linear_gain(0.5), b0, 1.0, 1e-3, 50, 3);
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    CHECK(a.V_hat[k](0, 0) == b.V_hat[k](0, 0));
    CHECK(a.S_rate[k] == b.S_rate[k]);
    CHECK(a.D_rate[k] == b.D_rate[k]);
  }
  CHECK(std::abs(a.mean_state.back()(0) - b.mean_state.back()(0)) > 1e-2);
  CHECK(b.mean_control.front()(0) == -0.5);
}
