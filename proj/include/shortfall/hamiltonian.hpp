#pragma once

#include "shortfall/scenario.hpp"

namespace shortfall {

/// Dual variable and gradient surrogate bundled with the coefficient
/// frame they act on. lambda must be nonnegative.
struct HamiltonianInputs {
  double lambda = 0;
  Vector p;  // l, stands in for the gradient of the Bellman solution
  CoefficientFrame frame;
};

/// Drift of the time-averaged log wealth ratio log(Z/Y) for portfolio u:
///   u.(a - r 1) - 1/2 |u|_c^2 + r - alpha + 1/2 |beta|^2.
double log_ratio_drift(const Vector& u, const CoefficientFrame& f);

/// Wiener loading of the log wealth ratio: b^T u - beta.
Vector log_ratio_vol(const Vector& u, const CoefficientFrame& f);

/// The portfolio attaining the inner supremum:
///   (1/(1+lambda)) c^{-1} (a - r 1 + lambda b beta + b sigma^T p).
Vector optimal_portfolio(double lambda, const Vector& p, const CoefficientFrame& f);

/// T_lambda = sigma sigma^T - (lambda/(1+lambda)) sigma b^T c^{-1} b sigma^T;
/// the quadratic-in-p coefficient of the optimized Hamiltonian. Positive
/// definite whenever sigma Q1 sigma^T is.
Matrix effective_diffusion(double lambda, const CoefficientFrame& f);

/// Closed-form coefficients of the optimized Hamiltonian as a quadratic in p:
///   H(p) = 1/2 p^T T p + w.p + h0.
struct HamiltonianQuadratic {
  Matrix T;  // l x l
  Vector w;  // l
  double h0 = 0;

  double eval(const Vector& p) const { return 0.5 * p.dot(T * p) + w.dot(p) + h0; }
};
HamiltonianQuadratic hamiltonian_coefficients(double lambda, const CoefficientFrame& f);

/// Optimized Hamiltonian evaluated via the expanded closed form (the
/// nested sup form is kept as a test oracle only, to avoid cancellation).
double optimized_hamiltonian(double lambda, const Vector& p, const CoefficientFrame& f);
double optimized_hamiltonian(const HamiltonianInputs& in);

/// Hamiltonian with the control frozen at v instead of optimized:
///   -lambda M(v) + 1/2 |_-lambda N(v) + sigma^T grad_f|^2
///   + grad_f.theta + 1/2 tr(sigma sigma^T hess_f).
double policy_hamiltonian(double lambda, const Vector& grad_f, const Matrix& hess_f,
                          const Vector& v, const CoefficientFrame& f);

}  // namespace shortfall
