#include "shortfall/bellman1d.hpp"

#include <Eigen/Sparse>
#include <cmath>

#include "shortfall/gaussian.hpp"
#include "shortfall/hamiltonian.hpp"

namespace shortfall {

namespace {

struct NodeData {
  Vector xs;      // grid nodes
  Vector T;       // quadratic coefficient of the optimized Hamiltonian
  Vector g1;      // linear coefficient
  Vector g0;      // constant term
  double s = 0;   // sigma sigma^T (scalar, constant)
  double h = 0;   // grid spacing
};

NodeData tabulate(double lambda, const MarketScenario& s, double R, int N) {
  NodeData nd;
  nd.xs = Vector::LinSpaced(N, -R, R);
  nd.T.resize(N);
  nd.g1.resize(N);
  nd.g0.resize(N);
  nd.s = (s.sigma * s.sigma.transpose())(0, 0);
  nd.h = 2.0 * R / (N - 1);
  for (int i = 0; i < N; ++i) {
    const CoefficientFrame f = eval_coefficients(s, Vector::Constant(1, nd.xs(i)));
    const HamiltonianQuadratic q = hamiltonian_coefficients(lambda, f);
    nd.T(i) = q.T(0, 0);
    nd.g1(i) = q.w(0);
    nd.g0(i) = q.h0;
  }
  return nd;
}

// Solves the linear ergodic problem
//   (g1 + ctrl) f' + s/2 f'' + g0 - ctrl^2/(2T) = Lambda
// with reflecting boundaries (ghost-node f' = 0) and f(center) = 0,
// for (f, Lambda) jointly.
void solve_linear_ergodic(const NodeData& nd, const Vector& ctrl, Vector& f, double& Lambda,
                          Eigen::SparseLU<Eigen::SparseMatrix<double>>& lu, bool& analyzed) {
  const int N = static_cast<int>(nd.xs.size());
  const int center = (N - 1) / 2;
  const double h = nd.h;
  const double diff = 0.5 * nd.s / (h * h);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * N + 2);
  Vector rhs(N + 1);
  for (int i = 0; i < N; ++i) {
    const double drift = (nd.g1(i) + ctrl(i)) / (2.0 * h);
    if (i == 0) {
      trip.emplace_back(0, 0, -2.0 * diff);
      trip.emplace_back(0, 1, 2.0 * diff);
    } else if (i == N - 1) {
      trip.emplace_back(i, i - 1, 2.0 * diff);
      trip.emplace_back(i, i, -2.0 * diff);
    } else {
      trip.emplace_back(i, i - 1, diff - drift);
      trip.emplace_back(i, i, -2.0 * diff);
      trip.emplace_back(i, i + 1, diff + drift);
    }
    trip.emplace_back(i, N, -1.0);  // -Lambda
    rhs(i) = -(nd.g0(i) - ctrl(i) * ctrl(i) / (2.0 * nd.T(i)));
  }
  trip.emplace_back(N, center, 1.0);  // gauge f(0) = 0
  rhs(N) = 0.0;

  Eigen::SparseMatrix<double> A(N + 1, N + 1);
  A.setFromTriplets(trip.begin(), trip.end());
  if (!analyzed) {
    lu.analyzePattern(A);
    analyzed = true;
  }
  lu.factorize(A);
  if (lu.info() != Eigen::Success)
    throw SolverError("linear ergodic solve failed (singular discretization)");
  const Vector sol = lu.solve(rhs);
  f = sol.head(N);
  Lambda = sol(N);
}

Vector central_slopes(const Vector& f, double h) {
  const int N = static_cast<int>(f.size());
  Vector fp = Vector::Zero(N);
  for (int i = 1; i < N - 1; ++i) fp(i) = (f(i + 1) - f(i - 1)) / (2.0 * h);
  // reflecting boundaries pin f' = 0 at the end nodes
  return fp;
}

// drift of the tilted factor diffusion at a node
double tilted_drift(double lambda, double x, double fprime, const MarketScenario& s) {
  const CoefficientFrame f = eval_coefficients(s, Vector::Constant(1, x));
  const Vector u = optimal_portfolio(lambda, Vector::Constant(1, fprime), f);
  const Vector vol = log_ratio_vol(u, f);
  const double ss = (s.sigma * s.sigma.transpose())(0, 0);
  return -lambda * (f.sigma * vol)(0) + f.theta(0) + ss * fprime;
}

}  // namespace

GridSolution solve_ergodic_hjb(double lambda, const MarketScenario& s, const GridParams& params) {
  if (s.l != 1)
    throw std::invalid_argument("grid solver handles scalar factors only (l = 1)");
  if (s.kind != ScenarioKind::parametric_1d)
    throw std::invalid_argument("grid solver expects a parametric_1d scenario");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  const int N = params.N;
  if (N < 201 || N % 2 == 0) throw std::invalid_argument("N must be odd and at least 201");
  const double R = params.R > 0 ? params.R : default_radius(s, lambda);

  // the factor drift must point inward at the edges, otherwise the
  // reflected problem does not approximate the whole-line one
  if (!(s.par.theta(R) < 0 && s.par.theta(-R) > 0))
    throw SolverError("factor drift does not point inward at |x| = " + std::to_string(R) +
                      "; enlarge R or fix the stability condition");

  const NodeData nd = tabulate(lambda, s, R, N);

  GridSolution sol;
  sol.lambda = lambda;
  sol.R = R;
  sol.xs = nd.xs;

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  Vector ctrl = Vector::Zero(N);
  Vector f;
  double Lambda = 0;
  bool converged = false;
  for (int it = 0; it < params.max_iter; ++it) {
    solve_linear_ergodic(nd, ctrl, f, Lambda, lu, analyzed);
    sol.lambda_history.push_back(Lambda);
    const Vector fp = central_slopes(f, nd.h);
    Vector ctrl_next(N);
    for (int i = 0; i < N; ++i) ctrl_next(i) = nd.T(i) * fp(i);
    const double delta = (ctrl_next - ctrl).lpNorm<Eigen::Infinity>();
    ctrl = ctrl_next;
    sol.iterations = it + 1;
    if (delta <= params.tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw SolverError("policy iteration did not converge in " +
                      std::to_string(params.max_iter) + " sweeps");

  sol.f = f;
  sol.fprime = central_slopes(f, nd.h);
  sol.Lambda = Lambda;

  // residual against the continuum equation with fourth-order stencils;
  // the solved second-order system would reproduce itself exactly
  double res = 0;
  const double h = nd.h;
  for (int i = 2; i < N - 2; ++i) {
    const double fp =
        (-f(i + 2) + 8 * f(i + 1) - 8 * f(i - 1) + f(i - 2)) / (12.0 * h);
    const double fpp = (-f(i + 2) + 16 * f(i + 1) - 30 * f(i) + 16 * f(i - 1) - f(i - 2)) /
                       (12.0 * h * h);
    const double H = 0.5 * nd.T(i) * fp * fp + nd.g1(i) * fp + nd.g0(i) + 0.5 * nd.s * fpp;
    res = std::max(res, std::abs(H - Lambda));
  }
  sol.residual_inf = res;
  return sol;
}

Vector stationary_density(double lambda, const GridSolution& sol, const MarketScenario& s) {
  const int N = static_cast<int>(sol.xs.size());
  const double h = sol.xs(1) - sol.xs(0);
  const double ss = (s.sigma * s.sigma.transpose())(0, 0);

  Vector mu(N);
  for (int i = 0; i < N; ++i) mu(i) = tilted_drift(lambda, sol.xs(i), sol.fprime(i), s);
  if (mu(N - 1) > 0 || mu(0) < 0)
    throw SolverError("tilted drift points outward at the grid edge; density is not "
                      "normalizable on [-R, R] (enlarge R)");

  // zero-flux stationary solution: m proportional to exp(int 2 mu / s)
  const int center = (N - 1) / 2;
  Vector I = Vector::Zero(N);
  for (int i = center + 1; i < N; ++i)
    I(i) = I(i - 1) + 0.5 * h * (2.0 * mu(i - 1) / ss + 2.0 * mu(i) / ss);
  for (int i = center - 1; i >= 0; --i)
    I(i) = I(i + 1) - 0.5 * h * (2.0 * mu(i) / ss + 2.0 * mu(i + 1) / ss);

  const double imax = I.maxCoeff();
  Vector m(N);
  for (int i = 0; i < N; ++i) m(i) = std::exp(I(i) - imax);
  double mass = 0;
  for (int i = 0; i + 1 < N; ++i) mass += 0.5 * h * (m(i) + m(i + 1));
  m /= mass;
  return m;
}

Vector stationary_density_adjoint(double lambda, const GridSolution& sol,
                                  const MarketScenario& s) {
  const int N = static_cast<int>(sol.xs.size());
  const double h = sol.xs(1) - sol.xs(0);
  const double ss = (s.sigma * s.sigma.transpose())(0, 0);

  Vector mu(N);
  for (int i = 0; i < N; ++i) mu(i) = tilted_drift(lambda, sol.xs(i), sol.fprime(i), s);

  // conservative fluxes F_{i+1/2} = mu_{i+1/2} (m_i + m_{i+1})/2
  //                                 - (s/2) (m_{i+1} - m_i)/h, all zero
  // in the stationary zero-flux state; replace the last equation by the
  // mass normalization
  std::vector<Eigen::Triplet<double>> trip;
  Vector rhs = Vector::Zero(N);
  const double dcoef = 0.5 * ss / h;
  for (int i = 0; i + 1 < N; ++i) {
    const double muh = 0.5 * (mu(i) + mu(i + 1));
    // flux between i and i+1 equals zero
    trip.emplace_back(i, i, 0.5 * muh + dcoef);
    trip.emplace_back(i, i + 1, 0.5 * muh - dcoef);
  }
  for (int i = 0; i < N; ++i)
    trip.emplace_back(N - 1, i, (i == 0 || i == N - 1) ? 0.5 * h : h);
  rhs(N - 1) = 1.0;

  Eigen::SparseMatrix<double> A(N, N);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
  if (lu.info() != Eigen::Success)
    throw SolverError("discrete Fokker-Planck solve failed");
  Vector m = lu.solve(rhs);
  for (int i = 0; i < N; ++i) m(i) = std::max(m(i), 0.0);
  double mass = 0;
  for (int i = 0; i + 1 < N; ++i) mass += 0.5 * h * (m(i) + m(i + 1));
  return m / mass;
}

double grid_rate(double lambda, const MarketScenario& s, const GridParams& params) {
  return solve_ergodic_hjb(lambda, s, params).Lambda;
}

double grid_rate_derivative(double lambda, const GridSolution& sol, const MarketScenario& s) {
  if (sol.m.size() != sol.xs.size())
    throw std::invalid_argument("grid solution has no density; run stationary_density first");
  const int N = static_cast<int>(sol.xs.size());
  const double h = sol.xs(1) - sol.xs(0);
  Vector g(N);
  for (int i = 0; i < N; ++i) {
    const CoefficientFrame f = eval_coefficients(s, Vector::Constant(1, sol.xs(i)));
    const Vector grad_f = Vector::Constant(1, sol.fprime(i));
    const Vector u = optimal_portfolio(lambda, grad_f, f);
    const Vector vol = log_ratio_vol(u, f);
    g(i) = -log_ratio_drift(u, f) + lambda * vol.squaredNorm() - grad_f.dot(f.sigma * vol);
  }
  double acc = 0;
  for (int i = 0; i + 1 < N; ++i)
    acc += 0.5 * h * (g(i) * sol.m(i) + g(i + 1) * sol.m(i + 1));
  return acc;
}

double default_radius(const MarketScenario& s, double lambda) {
  if (s.is_affine()) {
    const RiccatiSolution sol = gaussian_rate(lambda, as_linear(s));
    return std::abs(sol.mstar(0)) + 6.0 * std::sqrt(sol.Sigma(0, 0));
  }
  // proxy: local linearization of the untilted factor at the origin,
  // widened since the tilt spreads the invariant law
  const double slope = s.par.theta.slope(0.0);
  const double ss = (s.sigma * s.sigma.transpose())(0, 0);
  const double var = slope < 0 ? ss / (-2.0 * slope) : 1.0;
  const double center = slope < 0 ? std::abs(s.par.theta(0.0) / slope) : 0.0;
  return 1.5 * (center + 6.0 * std::sqrt(var));
}

}  // namespace shortfall
