#pragma once

#include "shortfall/scenario.hpp"

namespace shortfall {

/// Per-lambda artifacts of the closed-form pipeline for linear scenarios.
/// P is the symmetric negative-semidefinite Riccati solution, p2 the
/// linear-term coefficient, D = A + B P the (Hurwitz) closed-loop matrix,
/// F the rate value, and (mstar, Sigma) the stationary law of the tilted
/// factor diffusion.
struct RiccatiSolution {
  double lambda = 0;
  Matrix A, B, C;
  Matrix P;
  Vector p2;
  Matrix D;
  double F = 0;
  Vector mstar;
  Matrix Sigma;
  // diagnostics
  double riccati_residual = 0;   // ||A^T P + P A + P B P - (lam/(1+lam)) C||_F
  double lyapunov_residual = 0;  // ||D Sigma + Sigma D^T + sigma sigma^T||_F
  double max_re_eig_D = 0;
};

struct RiccatiCoefficients {
  Matrix A, B, C;
};

/// A = Theta1 - (lam/(1+lam)) sigma b^T c^{-1} (A1 - 1 r1^T),
/// B = sigma sigma^T - (lam/(1+lam)) sigma b^T c^{-1} b sigma^T,
/// C = (A1 - 1 r1^T)^T c^{-1} (A1 - 1 r1^T).
RiccatiCoefficients riccati_coefficients(double lambda, const MarketScenario& s);

/// Continuous-time Lyapunov equation A^T X + X A + Q = 0 for Hurwitz A,
/// solved by Schur reduction and triangular back-substitution.
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

/// Stabilizing solution X >= 0 of A^T X + X A - X B X + Q = 0 (B > 0,
/// Q >= 0): stable invariant subspace of the associated 2lx2l Hamiltonian
/// matrix, polished by Newton-Kleinman iterations. Throws SolverError with
/// eigenvalue diagnostics when no stabilizing solution exists.
Matrix solve_care(const Matrix& A, const Matrix& B, const Matrix& Q);

/// The negative-semidefinite P solving A^T P + P A + P B P = (lam/(1+lam)) C
/// with A + B P Hurwitz, via the substitution X = -P.
Matrix solve_riccati(const Matrix& A, const Matrix& B, const Matrix& C, double lambda);

/// Linear-term coefficient: D^T p2 = rhs(lambda, P, scenario).
Vector solve_linear_term(double lambda, const Matrix& P, const MarketScenario& s);

/// Full per-lambda solve: P, p2, rate value F(lambda), and the stationary
/// mean/covariance of the tilted factor.
RiccatiSolution gaussian_rate(double lambda, const MarketScenario& s);

/// F'(lambda) as the exact Gaussian moment of the (quadratic) derivative
/// integrand under Normal(mstar, Sigma).
double gaussian_rate_derivative(double lambda, const RiccatiSolution& sol,
                                const MarketScenario& s);

}  // namespace shortfall
