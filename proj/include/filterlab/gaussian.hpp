#pragma once

#include "filterlab/diffusion.hpp"
#include "filterlab/simulate.hpp"

#include <functional>
#include <vector>

namespace filterlab {

// dX = A X dt + B dW,  dY = C X dt + dU.
struct LinearModel {
  Matrix A;
  Matrix B;
  Matrix C;

  Matrix sigma() const { return B * B.transpose(); }
  std::size_t dim() const { return static_cast<std::size_t>(A.rows()); }
  void validate() const;
};

struct GaussianBelief {
  Vector mean;
  Matrix cov;
};

struct SurpriseLedgerPoint {
  double t = 0.0;
  double H = 0.0;
  double E = 0.0;
  double F = 0.0;
  double dH_dt = 0.0;
  double dE_dt = 0.0;
  double dF_dt = 0.0;
};

bool is_hurwitz(const Matrix& A);

// Cholesky-based inverse and log-determinant for covariance matrices.
// Throws NumericalError when the smallest eigenvalue is below
// 1e-12 times the largest.
Matrix spd_inverse(const Matrix& V);
double spd_log_det(const Matrix& V);
void require_positive_definite(const Matrix& V, const char* what);

// Solves A V + V A^T + Sigma = 0 (complex Schur / Bartels-Stewart).
// Throws NumericalError("no steady state") unless A is Hurwitz.
Matrix lyapunov_steady(const Matrix& A, const Matrix& sigma);

// Right-hand sides of the covariance equations.
Matrix lyapunov_rhs(const Matrix& A, const Matrix& sigma, const Matrix& V);
Matrix riccati_rhs(const Matrix& A, const Matrix& sigma, const Matrix& C, const Matrix& V);

// One classical RK4 step of dV/dt = rhs(V).
Matrix rk4_step(const std::function<Matrix(const Matrix&)>& rhs, const Matrix& V, double dt);

// Integrates dV/dt = A V + V A^T + Sigma and d mu/dt = A mu with RK4.
GaussianBelief propagate_gaussian(const Matrix& A, const Matrix& sigma,
                                  const GaussianBelief& belief0, double t, double dt = 1e-3);

// Gaussian surprise ledger. The internal surprise includes the mean:
// E = 1/2 tr{Vss^-1 (V + mu mu^T)} + 1/2 ln((2 pi)^n |Vss|), so F = E - H is
// the relative entropy D(N(mu, V) || N(0, Vss)).
SurpriseLedgerPoint surprise_ledger(const GaussianBelief& belief, const Matrix& V_ss,
                                    const Matrix& A, const Matrix& sigma, double t = 0.0);

// Kullback-Leibler divergence D(N(mu1, V1) || N(mu2, V2)).
double gaussian_kl(const Vector& mu1, const Matrix& V1, const Vector& mu2, const Matrix& V2);

struct KalmanBucyRun {
  std::vector<GaussianBelief> beliefs;  // k = 0..K
  std::vector<Vector> innovations;      // dI_k = dY_k - C Xhat_k dt, k = 0..K-1
};

// Optional additive control beta(t, belief) entering the mean equation.
using BeliefControl = std::function<Vector(double, const GaussianBelief&)>;

// Riccati covariance by RK4 at the path step; mean by
// dXhat = A Xhat dt + Vhat C^T dI (+ beta dt).
KalmanBucyRun kalman_bucy_run(const LinearModel& model, const JointPath& path,
                              const GaussianBelief& belief0, const BeliefControl& control = {});

// Riccati covariance trajectory alone (deterministic).
std::vector<Matrix> riccati_trajectory(const LinearModel& model, const Matrix& V0, double dt,
                                       std::size_t steps);

struct KbInfoRates {
  double S_rate = 0.0;   // 1/2 tr{C Vhat C^T}
  double D_rate = 0.0;   // 1/2 tr{Sigma (Vhat^-1 - V^-1)}
  double I_rate = 0.0;   // S_rate - D_rate
  double I_closed = 0.0; // 1/2 ln(|V| / |Vhat|)
};

KbInfoRates kb_info_rates(const Matrix& V, const Matrix& V_hat, const Matrix& sigma,
                          const Matrix& C);

// DiffusionModel view of a linear model (drift A x + beta, h = C x).
DiffusionModel make_lqg(const LinearModel& model);

}  // namespace filterlab
