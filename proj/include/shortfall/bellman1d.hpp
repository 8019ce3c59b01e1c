#pragma once

#include "shortfall/scenario.hpp"

namespace shortfall {

struct GridParams {
  double R = 0;        // half-width of the grid; 0 means choose automatically
  int N = 2001;        // number of nodes, odd so 0 is a node
  double tol = 1e-10;  // sup-norm stopping tolerance on the control update
  int max_iter = 60;
};

/// Solution of the scalar-factor ergodic Bellman equation on [-R, R]:
/// values f (gauge f(0) = 0), central-difference slopes, the ergodic
/// constant Lambda = F(lambda), and the invariant density m of the tilted
/// factor (empty until stationary_density fills it).
struct GridSolution {
  double lambda = 0;
  double R = 0;
  Vector xs;
  Vector f;
  Vector fprime;
  double Lambda = 0;
  Vector m;
  // sup-norm residual of the continuum equation over interior nodes,
  // estimated with fourth-order stencils so it tracks the actual
  // discretization error instead of the solved second-order identity
  double residual_inf = 0;
  int iterations = 0;
  std::vector<double> lambda_history;  // ergodic constant per policy sweep
};

/// Policy iteration on the control representation of the quadratic
/// gradient term: each sweep solves a linear ergodic problem with
/// reflecting boundaries for (f, Lambda) jointly, then refreshes the
/// control. Requires l = 1 and an inward-pointing factor drift at +/-R.
GridSolution solve_ergodic_hjb(double lambda, const MarketScenario& s, const GridParams& params);

/// Invariant density of the tilted factor diffusion on the grid, computed
/// from the 1-D zero-flux integrating factor exp(int 2 mu / (sigma sigma^T)),
/// normalized to unit trapezoid mass.
Vector stationary_density(double lambda, const GridSolution& sol, const MarketScenario& s);

/// Cross-check: kernel of the discrete Fokker-Planck operator (conservative
/// fluxes, zero-flux boundaries) normalized the same way.
Vector stationary_density_adjoint(double lambda, const GridSolution& sol,
                                  const MarketScenario& s);

/// Ergodic constant only.
double grid_rate(double lambda, const MarketScenario& s, const GridParams& params);

/// Trapezoid quadrature of the rate-derivative integrand against m.
double grid_rate_derivative(double lambda, const GridSolution& sol, const MarketScenario& s);

/// Default half-width: stationary mean plus six standard deviations of the
/// tilted factor (exact for affine scenarios, proxy otherwise).
double default_radius(const MarketScenario& s, double lambda);

}  // namespace shortfall
