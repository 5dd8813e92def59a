#include "filterlab/errors.hpp"
#include "filterlab/gaussian.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace filterlab;

namespace {

// vec(A V + V A^T) = (I (x) A + A (x) I) vec(V), solved densely.
Matrix kronecker_lyapunov(const Matrix& A, const Matrix& S) {
  const Eigen::Index n = A.rows();
  Matrix K = Matrix::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) {
        K(i + j * n, k + j * n) += A(i, k);  // A V
        K(i + j * n, i + k * n) += A(j, k);  // V A^T
      }
  const Vector v = K.fullPivLu().solve(-Eigen::Map<const Vector>(S.data(), n * n));
  return Eigen::Map<const Matrix>(v.data(), n, n);
}

Matrix expm_eig(const Matrix& A, double t) {
  Eigen::ComplexEigenSolver<Matrix> es(A);
  const Eigen::MatrixXcd P = es.eigenvectors();
  const Eigen::VectorXcd l = (es.eigenvalues() * t).array().exp();
  return (P * l.asDiagonal() * P.inverse()).real();
}

LinearModel scalar(double a, double sigma, double c) {
  LinearModel m;
  m.A = Matrix::Constant(1, 1, a);
  m.B = Matrix::Constant(1, 1, std::sqrt(sigma));
  m.C = Matrix::Constant(1, 1, c);
  return m;
}

}  // namespace

TEST_CASE("lyapunov_steady matches the Kronecker solve") {
  Matrix A(3, 3), B(3, 2);
  A << -1.0, 0.5, 0.0, -0.3, -2.0, 0.4, 0.1, 0.0, -0.7;
  B << 1.0, 0.2, 0.0, 0.8, 0.3, -0.5;
  const Matrix S = B * B.transpose();
  const Matrix V = lyapunov_steady(A, S);
  CHECK((V - kronecker_lyapunov(A, S)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((A * V + V * A.transpose() + S).cwiseAbs().maxCoeff() < 1e-12);

  // scalar OU: Sigma / 2a
  CHECK(lyapunov_steady(Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 2.0))(0, 0) ==
        doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("no steady state without a Hurwitz drift") {
  CHECK_FALSE(is_hurwitz(Matrix::Constant(1, 1, 0.0)));
  CHECK_THROWS_AS(lyapunov_steady(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0)), NumericalError);
}

TEST_CASE("propagated mean is exp(At) mu0 and covariance relaxes to V_ss") {
  Matrix A(2, 2);
  A << -1.0, 1.0, 0.0, -2.0;
  const Matrix S = Matrix::Identity(2, 2);
  GaussianBelief b{Vector(2), Matrix::Identity(2, 2) * 0.25};
  b.mean << 1.0, -1.0;
  const GaussianBelief out = propagate_gaussian(A, S, b, 1.5, 1e-3);
  CHECK((out.mean - expm_eig(A, 1.5) * b.mean).norm() < 1e-10);
  // V(t) = e^{At} (V0 - Vss) e^{A^T t} + Vss
  const Matrix Vss = lyapunov_steady(A, S);
  const Matrix E = expm_eig(A, 1.5);
  CHECK((out.cov - (E * (b.cov - Vss) * E.transpose() + Vss)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("surprise ledger: OU at V = 2") {
  const Matrix A = Matrix::Constant(1, 1, -1.0), S = Matrix::Constant(1, 1, 2.0);
  const Matrix Vss = lyapunov_steady(A, S);
  const SurpriseLedgerPoint p = surprise_ledger({Vector::Zero(1), Matrix::Constant(1, 1, 2.0)}, Vss, A, S);
  // F = KL(N(0,2) || N(0,1)) = 1/2 (2 - 1 - ln 2)
  CHECK(p.F == doctest::Approx(0.5 * (1.0 - std::log(2.0))).epsilon(1e-14));
  // dV/dt = 2 A V + S = -2; dF/dt = 1/2 (1/Vss - 1/V) dV/dt
  CHECK(p.dF_dt == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(p.H == doctest::Approx(0.5 * std::log(2.0 * M_PI * M_E * 2.0)).epsilon(1e-14));
  CHECK(p.dH_dt == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(p.F == doctest::Approx(p.E - p.H).epsilon(1e-14));
}

TEST_CASE("surprise ledger at the steady state is stationary") {
  Matrix A(2, 2);
  A << -1.0, 0.3, -0.2, -0.5;
  const Matrix S = Matrix::Identity(2, 2) * 0.7;
  const Matrix Vss = lyapunov_steady(A, S);
  const SurpriseLedgerPoint p = surprise_ledger({Vector::Zero(2), Vss}, Vss, A, S);
  CHECK(std::abs(p.F) < 1e-12);
  CHECK(std::abs(p.dF_dt) < 1e-12);
  CHECK(std::abs(p.dH_dt) < 1e-12);
}

TEST_CASE("gaussian_kl against the closed form") {
  Vector m1(2), m2(2);
  m1 << 0.3, -0.2;
  m2 << -0.1, 0.5;
  Matrix V1(2, 2), V2(2, 2);
  V1 << 1.0, 0.2, 0.2, 0.5;
  V2 << 2.0, -0.3, -0.3, 1.0;
  const Vector d = m2 - m1;
  const double oracle = 0.5 * ((V2.inverse() * V1).trace() + d.dot(V2.inverse() * d) - 2.0 +
                               std::log(V2.determinant() / V1.determinant()));
  CHECK(gaussian_kl(m1, V1, m2, V2) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(gaussian_kl(m1, V1, m1, V1) == doctest::Approx(0.0));
}

TEST_CASE("Riccati relaxes to sqrt(3) - 1 and the rates balance") {
  const LinearModel lm = scalar(-1.0, 2.0, 1.0);
  const auto V = riccati_trajectory(lm, Matrix::Constant(1, 1, 1.0), 1e-3, 20000);
  const double Vh = V.back()(0, 0);
  CHECK(Vh == doctest::Approx(std::sqrt(3.0) - 1.0).epsilon(1e-12));
  const KbInfoRates r = kb_info_rates(Matrix::Constant(1, 1, 1.0), V.back(), lm.sigma(), lm.C);
  CHECK(r.S_rate == doctest::Approx(0.5 * (std::sqrt(3.0) - 1.0)).epsilon(1e-12));
  CHECK(r.D_rate == doctest::Approx(0.5 * (std::sqrt(3.0) - 1.0)).epsilon(1e-12));
  CHECK(std::abs(r.I_rate) < 1e-12);
}

TEST_CASE("Kalman-Bucy run follows the Riccati covariance and its mean update") {
  const LinearModel lm = scalar(-1.0, 2.0, 1.0);
  const DiffusionModel dm = make_lqg(lm);
  const GaussianInit init{Vector::Zero(1), Matrix::Constant(1, 1, 1.0)};
  const JointPath path = simulate_joint(dm, init, 0.5, 1e-3, 3, 0);
  const KalmanBucyRun kb = kalman_bucy_run(lm, path, {init.mean, init.cov});
  const auto V = riccati_trajectory(lm, init.cov, 1e-3, path.steps());
  REQUIRE(kb.beliefs.size() == path.steps() + 1);
  double x = 0.0;
  for (std::size_t k = 0; k < path.steps(); ++k) {
    CHECK(kb.beliefs[k].cov(0, 0) == V[k](0, 0));
    const double dI = path.obs_increments[k](0) - x * 1e-3;
    CHECK(kb.innovations[k](0) == doctest::Approx(dI).epsilon(1e-14));
    x = x - x * 1e-3 + V[k](0, 0) * dI;
  }
  CHECK(kb.beliefs.back().mean(0) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("covariance helpers reject indefinite input") {
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(spd_inverse(bad), NumericalError);
  Matrix good(2, 2);
  good << 2.0, 0.5, 0.5, 1.0;
  CHECK(spd_log_det(good) == doctest::Approx(std::log(good.determinant())).epsilon(1e-14));
}
