#include "filterlab/gaussian.hpp"

#include "filterlab/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

namespace filterlab {

void LinearModel::validate() const {
  const auto n = A.rows();
  if (n == 0 || A.cols() != n) throw ConfigError("lqg: A must be square and non-empty");
  if (B.rows() != n) throw ConfigError("lqg: B must have as many rows as A");
  if (C.size() > 0 && C.cols() != n) throw ConfigError("lqg: C must have as many columns as A");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite())
    throw ConfigError("lqg: matrices must be finite");
}

bool is_hurwitz(const Matrix& A) {
  Eigen::EigenSolver<Matrix> solver(A, false);
  return (solver.eigenvalues().real().array() < 0.0).all();
}

void require_positive_definite(const Matrix& V, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (V + V.transpose()),
                                               Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  if (!V.allFinite() || ev.size() == 0 || !(ev.minCoeff() > 1e-12 * ev.maxCoeff()) ||
      !(ev.maxCoeff() > 0.0)) {
    std::ostringstream msg;
    msg << what << " is singular or indefinite (eigenvalues " << ev.transpose() << ")";
    throw NumericalError(msg.str());
  }
}

Matrix spd_inverse(const Matrix& V) {
  require_positive_definite(V, "covariance");
  Eigen::LLT<Matrix> llt(V);
  Matrix inv = llt.solve(Matrix::Identity(V.rows(), V.cols()));
  return 0.5 * (inv + inv.transpose());
}

double spd_log_det(const Matrix& V) {
  require_positive_definite(V, "covariance");
  Eigen::LLT<Matrix> llt(V);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix lyapunov_steady(const Matrix& A, const Matrix& sigma) {
  if (A.rows() != A.cols() || sigma.rows() != A.rows() || sigma.cols() != A.cols())
    throw ConfigError("lyapunov_steady: dimension mismatch");
  if (!is_hurwitz(A)) throw NumericalError("no steady state: A is not Hurwitz");

  using CMatrix = Eigen::MatrixXcd;
  const auto n = A.rows();
  Eigen::ComplexSchur<Matrix> schur(A);
  const CMatrix& U = schur.matrixU();
  const CMatrix& T = schur.matrixT();
  const CMatrix rhs = -(U.adjoint() * sigma.cast<std::complex<double>>() * U);

  // T Y + Y T^H = rhs; column j couples only to columns k > j.
  CMatrix Y = CMatrix::Zero(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    Eigen::VectorXcd b = rhs.col(j);
    for (Eigen::Index k = j + 1; k < n; ++k) b -= std::conj(T(j, k)) * Y.col(k);
    CMatrix shifted = T;
    shifted.diagonal().array() += std::conj(T(j, j));
    Y.col(j) = shifted.triangularView<Eigen::Upper>().solve(b);
  }
  Matrix V = (U * Y * U.adjoint()).real();
  return 0.5 * (V + V.transpose());
}

Matrix lyapunov_rhs(const Matrix& A, const Matrix& sigma, const Matrix& V) {
  return A * V + V * A.transpose() + sigma;
}

Matrix riccati_rhs(const Matrix& A, const Matrix& sigma, const Matrix& C, const Matrix& V) {
  Matrix out = A * V + V * A.transpose() + sigma;
  if (C.size() > 0) out -= V * C.transpose() * C * V;
  return out;
}

Matrix rk4_step(const std::function<Matrix(const Matrix&)>& rhs, const Matrix& V, double dt) {
  const Matrix k1 = rhs(V);
  const Matrix k2 = rhs(V + 0.5 * dt * k1);
  const Matrix k3 = rhs(V + 0.5 * dt * k2);
  const Matrix k4 = rhs(V + dt * k3);
  return V + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

GaussianBelief propagate_gaussian(const Matrix& A, const Matrix& sigma,
                                  const GaussianBelief& belief0, double t, double dt) {
  if (!(t >= 0.0)) throw ConfigError("propagate_gaussian: t must be non-negative");
  if (!(dt > 0.0)) throw ConfigError("propagate_gaussian: dt must be positive");
  GaussianBelief b = belief0;
  if (t == 0.0) return b;
  const auto steps = static_cast<std::size_t>(std::ceil(t / dt - 1e-9));
  const double h = t / static_cast<double>(steps);
  const auto cov_rhs = [&](const Matrix& V) { return lyapunov_rhs(A, sigma, V); };
  const auto mean_rhs = [&](const Matrix& m) -> Matrix { return A * m; };
  for (std::size_t k = 0; k < steps; ++k) {
    b.cov = rk4_step(cov_rhs, b.cov, h);
    b.mean = rk4_step(mean_rhs, b.mean, h);
    if (!b.cov.allFinite() || !b.mean.allFinite())
      throw NumericalError("propagate_gaussian: non-finite state (step unstable)");
  }
  b.cov = 0.5 * (b.cov + b.cov.transpose());
  return b;
}

SurpriseLedgerPoint surprise_ledger(const GaussianBelief& belief, const Matrix& V_ss,
                                    const Matrix& A, const Matrix& sigma, double t) {
  const Matrix& V = belief.cov;
  const Vector& mu = belief.mean;
  const double n = static_cast<double>(V.rows());
  const Matrix Vinv = spd_inverse(V);
  const Matrix Vss_inv = spd_inverse(V_ss);
  const double logdet_V = spd_log_det(V);
  const double logdet_ss = spd_log_det(V_ss);
  const Matrix dV = V - V_ss;
  const double mean_term = mu.dot(Vss_inv * A * mu);

  SurpriseLedgerPoint p;
  p.t = t;
  p.H = 0.5 * logdet_V + 0.5 * n * std::log(2.0 * std::numbers::pi * std::numbers::e);
  const double E0 = 0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet_ss);
  p.E = 0.5 * (Vss_inv * (V + mu * mu.transpose())).trace() + E0;
  p.F = p.E - p.H;
  p.dH_dt = (Vinv * A * dV).trace();
  p.dE_dt = (Vss_inv * A * dV).trace() + mean_term;
  const Matrix D = Vss_inv - Vinv;
  p.dF_dt = -0.5 * (D * sigma * D * V).trace() + mean_term;
  return p;
}

double gaussian_kl(const Vector& mu1, const Matrix& V1, const Vector& mu2, const Matrix& V2) {
  const Matrix V2inv = spd_inverse(V2);
  const Vector d = mu1 - mu2;
  const double n = static_cast<double>(V1.rows());
  return 0.5 * ((V2inv * V1).trace() - n + d.dot(V2inv * d) + spd_log_det(V2) -
                spd_log_det(V1));
}

std::vector<Matrix> riccati_trajectory(const LinearModel& model, const Matrix& V0, double dt,
                                       std::size_t steps) {
  const Matrix sigma = model.sigma();
  const auto rhs = [&](const Matrix& V) { return riccati_rhs(model.A, sigma, model.C, V); };
  std::vector<Matrix> out;
  out.reserve(steps + 1);
  out.push_back(V0);
  for (std::size_t k = 0; k < steps; ++k) {
    Matrix next = rk4_step(rhs, out.back(), dt);
    next = 0.5 * (next + next.transpose());
    try {
      require_positive_definite(next, "Riccati covariance");
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << e.what() << " at t=" << static_cast<double>(k + 1) * dt;
      throw NumericalError(msg.str());
    }
    out.push_back(std::move(next));
  }
  return out;
}

KalmanBucyRun kalman_bucy_run(const LinearModel& model, const JointPath& path,
                              const GaussianBelief& belief0, const BeliefControl& control) {
  model.validate();
  const std::size_t steps = path.steps();
  const double dt = path.dt;
  const std::vector<Matrix> covs = riccati_trajectory(model, belief0.cov, dt, steps);

  KalmanBucyRun run;
  run.beliefs.reserve(steps + 1);
  run.innovations.reserve(steps);
  run.beliefs.push_back({belief0.mean, covs[0]});
  Vector xhat = belief0.mean;
  for (std::size_t k = 0; k < steps; ++k) {
    const Matrix& V = covs[k];
    Vector innovation = path.obs_increments[k];
    if (model.C.size() > 0) innovation -= model.C * xhat * dt;
    Vector next = xhat + model.A * xhat * dt;
    if (model.C.size() > 0) next += V * model.C.transpose() * innovation;
    if (control) next += control(path.times[k], run.beliefs.back()) * dt;
    xhat = std::move(next);
    run.innovations.push_back(std::move(innovation));
    run.beliefs.push_back({xhat, covs[k + 1]});
  }
  return run;
}

KbInfoRates kb_info_rates(const Matrix& V, const Matrix& V_hat, const Matrix& sigma,
                          const Matrix& C) {
  KbInfoRates r;
  r.S_rate = C.size() > 0 ? 0.5 * (C * V_hat * C.transpose()).trace() : 0.0;
  r.D_rate = 0.5 * (sigma * (spd_inverse(V_hat) - spd_inverse(V))).trace();
  r.I_rate = r.S_rate - r.D_rate;
  r.I_closed = 0.5 * (spd_log_det(V) - spd_log_det(V_hat));
  return r;
}

DiffusionModel make_lqg(const LinearModel& lm) {
  lm.validate();
  DiffusionModel m;
  m.name = "lqg";
  const std::size_t n = lm.dim();
  m.dim_state = n;
  m.dim_noise = static_cast<std::size_t>(lm.B.cols());
  m.dim_obs = lm.C.size() > 0 ? static_cast<std::size_t>(lm.C.rows()) : 1;
  m.dim_control = n;
  m.drift = [A = lm.A, n](ConstSpan x, ConstSpan control, MutSpan out) {
    Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(n));
    Eigen::Map<Vector> ov(out.data(), static_cast<Eigen::Index>(n));
    ov.noalias() = A * xv;
    if (!control.empty()) ov += Eigen::Map<const Vector>(control.data(), static_cast<Eigen::Index>(n));
  };
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  m.diffusion_factor = [B = RowMajor(lm.B)](ConstSpan, MutSpan out) {
    std::copy(B.data(), B.data() + B.size(), out.begin());
  };
  const Matrix C = lm.C.size() > 0 ? lm.C : Matrix::Zero(1, static_cast<Eigen::Index>(n));
  m.observation = [C, n](ConstSpan x, ConstSpan, MutSpan out) {
    Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(n));
    Eigen::Map<Vector>(out.data(), C.rows()).noalias() = C * xv;
  };
  m.constant_diffusion = true;
  m.has_steady_state = is_hurwitz(lm.A);
  const Matrix sigma = lm.sigma();
  Vector half(n);
  if (m.has_steady_state) {
    half = 6.0 * lyapunov_steady(lm.A, sigma).diagonal().cwiseSqrt();
  } else {
    half = Vector::Constant(static_cast<Eigen::Index>(n), 10.0);
  }
  m.domain.lower = -half;
  m.domain.upper = half;
  m.derivatives.step = 1e-5 * 2.0 * half.maxCoeff();
  return m;
}

}  // namespace filterlab
