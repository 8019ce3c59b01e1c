#pragma once

#include <functional>

#include "shortfall/scenario.hpp"

namespace shortfall {

/// q(x) = x^T H x + g.x + c with H symmetric. Gaussian expectations of
/// such forms are available in closed form, which is how rate derivatives
/// and saddle residuals are computed exactly in the linear case.
struct QuadraticForm {
  Matrix H;
  Vector g;
  double c = 0;

  double eval(const Vector& x) const { return x.dot(H * x) + g.dot(x) + c; }

  /// E[q(X)] for X ~ Normal(mean, cov).
  double gaussian_expectation(const Vector& mean, const Matrix& cov) const {
    return mean.dot(H * mean) + (H * cov).trace() + g.dot(mean) + c;
  }
};

/// Recovers the exact (H, g, c) of a function known to be quadratic by
/// probing it at 0, +/- e_i and e_i + e_j. Exact up to roundoff; no
/// truncation error is involved.
inline QuadraticForm fit_quadratic(const std::function<double(const Vector&)>& fn, int dim) {
  QuadraticForm q;
  q.H = Matrix::Zero(dim, dim);
  q.g = Vector::Zero(dim);
  q.c = fn(Vector::Zero(dim));
  std::vector<double> fplus(dim), fminus(dim);
  for (int i = 0; i < dim; ++i) {
    Vector e = Vector::Zero(dim);
    e(i) = 1.0;
    fplus[i] = fn(e);
    fminus[i] = fn(-e);
    q.g(i) = 0.5 * (fplus[i] - fminus[i]);
    q.H(i, i) = 0.5 * (fplus[i] + fminus[i] - 2.0 * q.c);
  }
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      Vector e = Vector::Zero(dim);
      e(i) = 1.0;
      e(j) = 1.0;
      // f(ei+ej) = c + g_i + g_j + H_ii + H_jj + 2 H_ij
      const double fij = fn(e);
      q.H(i, j) = q.H(j, i) =
          0.5 * (fij - q.c - q.g(i) - q.g(j) - q.H(i, i) - q.H(j, j));
    }
  }
  return q;
}

}  // namespace shortfall
