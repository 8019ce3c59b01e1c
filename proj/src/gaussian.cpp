#include "shortfall/gaussian.hpp"

#include <Eigen/Eigenvalues>
#include <complex>
#include <sstream>

#include "shortfall/hamiltonian.hpp"
#include "shortfall/quadratic.hpp"

namespace shortfall {

namespace {

using ComplexMatrix = Eigen::MatrixXcd;

double max_real_eig(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().real().maxCoeff();
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void require_linear(const MarketScenario& s) {
  if (s.kind != ScenarioKind::linear_gaussian)
    throw std::invalid_argument("closed-form pipeline requires a linear_gaussian scenario");
}

// a(x) - r(x) 1 = Atil x + atil
Matrix excess_linear(const MarketScenario& s) {
  return s.lin.A1 - Vector::Ones(s.n) * s.lin.r1.transpose();
}
Vector excess_const(const MarketScenario& s) {
  return s.lin.a2 - s.lin.r2 * Vector::Ones(s.n);
}

double care_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& X) {
  return (A.transpose() * X + X * A - X * B * X + Q).norm();
}

}  // namespace

RiccatiCoefficients riccati_coefficients(double lambda, const MarketScenario& s) {
  require_linear(s);
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  const double frac = lambda / (1.0 + lambda);
  const Matrix c = s.b * s.b.transpose();
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success) throw DefinitenessError("c = b b^T is singular");
  const Matrix Atil = excess_linear(s);
  const Matrix sb = s.sigma * s.b.transpose();  // l x n

  RiccatiCoefficients out;
  out.A = s.lin.Theta1 - frac * sb * llt.solve(Atil);
  out.B = s.sigma * s.sigma.transpose() - frac * sb * llt.solve(sb.transpose());
  out.C = Atil.transpose() * llt.solve(Atil);
  return out;
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  Eigen::ComplexSchur<Matrix> schur(A);
  if (schur.info() != Eigen::Success) throw SolverError("Schur decomposition failed");
  const ComplexMatrix U = schur.matrixU();
  const ComplexMatrix T = schur.matrixT();  // upper triangular

  // A^T X + X A = -Q  =>  T^H Y + Y T = -U^H Q U with X = U Y U^H.
  const ComplexMatrix Qt = U.adjoint() * Q * U;
  ComplexMatrix Y = ComplexMatrix::Zero(n, n);
  const ComplexMatrix Th = T.adjoint();  // lower triangular
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXcd rhs = -Qt.col(j);
    for (Eigen::Index i = 0; i < j; ++i) rhs -= T(i, j) * Y.col(i);
    ComplexMatrix M = Th;
    M.diagonal().array() += T(j, j);
    Y.col(j) = M.triangularView<Eigen::Lower>().solve(rhs);
  }
  return symmetrize((U * Y * U.adjoint()).real());
}

Matrix solve_care(const Matrix& A, const Matrix& B, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  if (Q.norm() < 1e-300) {
    // X = 0 is the stabilizing solution iff A is already Hurwitz
    if (max_real_eig(A) < 0) return Matrix::Zero(n, n);
    throw SolverError("zero-cost Riccati equation with unstable A has no stabilizing solution");
  }

  Matrix H(2 * n, 2 * n);
  H << A, -B, -Q, -A.transpose();
  Eigen::EigenSolver<Matrix> es(H);
  if (es.info() != Eigen::Success) throw SolverError("Hamiltonian eigendecomposition failed");

  // basis of the stable invariant subspace
  ComplexMatrix V(2 * n, n);
  Eigen::Index taken = 0;
  for (Eigen::Index i = 0; i < 2 * n && taken < n; ++i) {
    if (es.eigenvalues()(i).real() < 0) V.col(taken++) = es.eigenvectors().col(i);
  }
  if (taken != n) {
    std::ostringstream msg;
    msg << "stable invariant subspace has dimension " << taken << " (expected " << n
        << "); Hamiltonian eigenvalues:";
    for (Eigen::Index i = 0; i < 2 * n; ++i) msg << " " << es.eigenvalues()(i);
    throw SolverError(msg.str());
  }

  const ComplexMatrix V1 = V.topRows(n);
  const ComplexMatrix V2 = V.bottomRows(n);
  Eigen::FullPivLU<ComplexMatrix> lu(V1);
  if (!lu.isInvertible())
    throw SolverError("stable subspace basis block is singular; no stabilizing solution");
  Matrix X = symmetrize((V2 * lu.inverse()).real());

  // Newton-Kleinman polish: each step solves a Lyapunov equation in the
  // closed loop A - B X, quadratically contracting the residual.
  for (int it = 0; it < 6; ++it) {
    const double res = care_residual(A, B, Q, X);
    if (res <= 1e-11 * (1.0 + X.norm())) break;
    const Matrix Acl = A - B * X;
    if (max_real_eig(Acl) >= 0) break;  // keep the subspace solution
    const Matrix Xn = solve_lyapunov(Acl, Q + X * B * X);
    if (care_residual(A, B, Q, Xn) >= res) break;  // stall
    X = Xn;
  }
  return X;
}

Matrix solve_riccati(const Matrix& A, const Matrix& B, const Matrix& C, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  const double frac = lambda / (1.0 + lambda);
  const Matrix X = solve_care(A, B, frac * C);
  const Matrix P = -X;

  const double residual = (A.transpose() * P + P * A + P * B * P - frac * C).norm();
  if (residual > 1e-9 * (1.0 + P.norm()))
    throw SolverError("Riccati residual " + std::to_string(residual) + " exceeds tolerance");
  Eigen::SelfAdjointEigenSolver<Matrix> es(P);
  if (es.eigenvalues().maxCoeff() > 1e-10)
    throw SolverError("Riccati solution is not negative semidefinite");
  const double dmax = max_real_eig(A + B * P);
  if (dmax >= 0)
    throw SolverError("closed-loop matrix D = A + B P is not Hurwitz (max Re eig " +
                      std::to_string(dmax) + ")");
  return P;
}

Vector solve_linear_term(double lambda, const Matrix& P, const MarketScenario& s) {
  require_linear(s);
  const double frac = lambda / (1.0 + lambda);
  const Matrix c = s.b * s.b.transpose();
  Eigen::LLT<Matrix> llt(c);
  const Matrix Atil = excess_linear(s);
  const Vector atil = excess_const(s);
  const auto co = riccati_coefficients(lambda, s);
  const Matrix D = co.A + co.B * P;

  const Vector rhs =
      frac * (Atil + s.b * s.sigma.transpose() * P).transpose() *
          llt.solve(atil + lambda * (s.b * s.beta)) +
      lambda * (s.lin.r1 - s.lin.alpha1 - P * (s.sigma * s.beta)) - P * s.lin.theta2;

  Eigen::FullPivLU<Matrix> lu(D.transpose());
  if (!lu.isInvertible())
    throw SolverError("D^T is singular, contradicting the Hurwitz certificate");
  return lu.solve(rhs);
}

RiccatiSolution gaussian_rate(double lambda, const MarketScenario& s) {
  require_linear(s);
  RiccatiSolution sol;
  sol.lambda = lambda;
  const auto co = riccati_coefficients(lambda, s);
  sol.A = co.A;
  sol.B = co.B;
  sol.C = co.C;
  sol.P = solve_riccati(co.A, co.B, co.C, lambda);
  sol.p2 = solve_linear_term(lambda, sol.P, s);
  sol.D = co.A + co.B * sol.P;

  const double frac = lambda / (1.0 + lambda);
  const Matrix c = s.b * s.b.transpose();
  Eigen::LLT<Matrix> llt(c);
  const Vector atil = excess_const(s);
  const Matrix ss = s.sigma * s.sigma.transpose();
  const Vector shifted = atil + lambda * (s.b * s.beta) + s.b * s.sigma.transpose() * sol.p2;

  sol.F = -0.5 * frac * shifted.dot(llt.solve(shifted)) -
          lambda * (s.lin.r2 - s.lin.alpha2 + 0.5 * s.beta.squaredNorm() -
                    s.beta.dot(s.sigma.transpose() * sol.p2)) +
          0.5 * lambda * lambda * s.beta.squaredNorm() + 0.5 * sol.p2.dot(ss * sol.p2) +
          sol.p2.dot(s.lin.theta2) + 0.5 * (ss * sol.P).trace();

  // stationary law of the tilted factor: dX = (D X + mu0) dt + sigma dW
  const Vector mu0 = -frac * (s.sigma * s.b.transpose()) * llt.solve(shifted) +
                     lambda * (s.sigma * s.beta) + ss * sol.p2 + s.lin.theta2;
  sol.mstar = -sol.D.fullPivLu().solve(mu0);
  sol.Sigma = solve_lyapunov(sol.D.transpose(), ss);

  sol.riccati_residual =
      (sol.A.transpose() * sol.P + sol.P * sol.A + sol.P * sol.B * sol.P - frac * sol.C).norm();
  sol.lyapunov_residual = (sol.D * sol.Sigma + sol.Sigma * sol.D.transpose() + ss).norm();
  sol.max_re_eig_D = max_real_eig(sol.D);
  return sol;
}

double gaussian_rate_derivative(double lambda, const RiccatiSolution& sol,
                                const MarketScenario& s) {
  require_linear(s);
  // integrand of the derivative formula: quadratic in x, so its mean under
  // Normal(mstar, Sigma) is exact
  auto integrand = [&](const Vector& x) {
    const CoefficientFrame f = eval_coefficients(s, x);
    const Vector grad_f = sol.P * x + sol.p2;
    const Vector u = optimal_portfolio(lambda, grad_f, f);
    const Vector vol = log_ratio_vol(u, f);
    return -log_ratio_drift(u, f) + lambda * vol.squaredNorm() -
           grad_f.dot(f.sigma * vol);
  };
  const QuadraticForm q = fit_quadratic(integrand, s.l);
  return q.gaussian_expectation(sol.mstar, sol.Sigma);
}

}  // namespace shortfall
