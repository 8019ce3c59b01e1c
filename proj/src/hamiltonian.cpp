#include "shortfall/hamiltonian.hpp"

#include <Eigen/Cholesky>

namespace shortfall {

namespace {

void require_nonnegative(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
}

}  // namespace

double log_ratio_drift(const Vector& u, const CoefficientFrame& f) {
  const Vector excess = f.a - Vector::Constant(f.a.size(), f.r);
  return u.dot(excess) - 0.5 * u.dot(f.c * u) + f.r - f.alpha + 0.5 * f.beta.squaredNorm();
}

Vector log_ratio_vol(const Vector& u, const CoefficientFrame& f) {
  return f.b.transpose() * u - f.beta;
}

Vector optimal_portfolio(double lambda, const Vector& p, const CoefficientFrame& f) {
  require_nonnegative(lambda);
  Eigen::LLT<Matrix> llt(f.c);
  if (llt.info() != Eigen::Success) throw DefinitenessError("c = b b^T is singular");
  const Vector excess = f.a - Vector::Constant(f.a.size(), f.r);
  return llt.solve(excess + lambda * (f.b * f.beta) + f.b * (f.sigma.transpose() * p)) /
         (1.0 + lambda);
}

Matrix effective_diffusion(double lambda, const CoefficientFrame& f) {
  require_nonnegative(lambda);
  const Matrix ss = f.sigma * f.sigma.transpose();
  Eigen::LLT<Matrix> llt(f.c);
  if (llt.info() != Eigen::Success) throw DefinitenessError("c = b b^T is singular");
  const Matrix bs = f.b * f.sigma.transpose();  // n x l
  return ss - (lambda / (1.0 + lambda)) * bs.transpose() * llt.solve(bs);
}

HamiltonianQuadratic hamiltonian_coefficients(double lambda, const CoefficientFrame& f) {
  require_nonnegative(lambda);
  const double frac = lambda / (1.0 + lambda);
  Eigen::LLT<Matrix> llt(f.c);
  if (llt.info() != Eigen::Success) throw DefinitenessError("c = b b^T is singular");

  const Vector excess = f.a - Vector::Constant(f.a.size(), f.r);
  const Vector shifted = excess + lambda * (f.b * f.beta);  // a - r1 + lambda b beta
  const Matrix bs = f.b * f.sigma.transpose();              // n x l

  HamiltonianQuadratic q;
  q.T = effective_diffusion(lambda, f);
  q.w = -frac * bs.transpose() * llt.solve(shifted) + lambda * (f.sigma * f.beta) + f.theta;
  q.h0 = -0.5 * frac * shifted.dot(llt.solve(shifted)) -
         lambda * (f.r - f.alpha + 0.5 * f.beta.squaredNorm()) +
         0.5 * lambda * lambda * f.beta.squaredNorm();
  return q;
}

double optimized_hamiltonian(double lambda, const Vector& p, const CoefficientFrame& f) {
  return hamiltonian_coefficients(lambda, f).eval(p);
}

double optimized_hamiltonian(const HamiltonianInputs& in) {
  return optimized_hamiltonian(in.lambda, in.p, in.frame);
}

double policy_hamiltonian(double lambda, const Vector& grad_f, const Matrix& hess_f,
                          const Vector& v, const CoefficientFrame& f) {
  require_nonnegative(lambda);
  const Vector vol = log_ratio_vol(v, f);
  const Vector tilt = -lambda * vol + f.sigma.transpose() * grad_f;
  const Matrix ss = f.sigma * f.sigma.transpose();
  return -lambda * log_ratio_drift(v, f) + 0.5 * tilt.squaredNorm() + grad_f.dot(f.theta) +
         0.5 * (ss * hess_f).trace();
}

}  // namespace shortfall
