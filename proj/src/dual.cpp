#include "shortfall/dual.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "shortfall/conditions.hpp"
#include "shortfall/hamiltonian.hpp"
#include "shortfall/quadratic.hpp"

namespace shortfall {

Vector PortfolioPolicy::evaluate(const Vector& x) const {
  if (std::isfinite(tau) && x.norm() > tau)
    return Vector::Zero(form == Form::linear ? K.rows() : u_table.rows());
  if (form == Form::linear) return K * x + k0;

  // tabulated (l = 1): linear interpolation, extrapolating with the edge slope
  const double xv = x(0);
  const int N = static_cast<int>(xs.size());
  const double h = xs(1) - xs(0);
  int i = static_cast<int>(std::floor((xv - xs(0)) / h));
  i = std::max(0, std::min(N - 2, i));
  const double t = (xv - xs(i)) / h;
  return u_table.col(i) * (1.0 - t) + u_table.col(i + 1) * t;
}

DualSolution shortfall_rate(double q, const RateOracle& oracle, double lmax_init,
                            bool stability_ok) {
  DualSolution sol;
  sol.q = q;

  const auto [F0, Fp0] = oracle(0.0);
  if (Fp0 >= -q) {
    if (!stability_ok)
      throw SolverError(
          "dual optimum is at lambda = 0 but the inward-drift stability condition failed; "
          "the boundary solution is not certified");
    sol.lambda_hat = 0.0;
    sol.boundary = true;
    sol.J = -F0;
    sol.saddle_residual = std::max(0.0, -q - Fp0);
    return sol;
  }

  // bracket: F' is increasing (F strictly convex), F'(0) < -q
  double lo = 0.0, glo = Fp0 + q;
  double hi = lmax_init > 0 ? lmax_init : 1.0;
  auto [Fhi, Fphi] = oracle(hi);
  double ghi = Fphi + q;
  int doublings = 0;
  while (ghi <= 0) {
    if (++doublings > 60)
      throw SolverError("could not bracket the dual optimum after 60 doublings of lambda_max; "
                        "the rate function does not grow superlinearly (nondegeneracy failure)");
    lo = hi;
    glo = ghi;
    hi *= 2.0;
    std::tie(Fhi, Fphi) = oracle(hi);
    ghi = Fphi + q;
  }

  // bisection with secant acceleration on F'(lambda) + q
  double lam = hi, g = ghi, F = Fhi;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(g) <= 1e-10 || (hi - lo) <= 1e-14 * (1.0 + hi)) break;
    double cand = lam - g * (hi - lo) / (ghi - glo);  // secant with bracket slope
    if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    const auto [Fc, Fpc] = oracle(cand);
    const double gc = Fpc + q;
    lam = cand;
    g = gc;
    F = Fc;
    if (gc > 0) {
      hi = cand;
      ghi = gc;
    } else {
      lo = cand;
      glo = gc;
    }
  }

  sol.lambda_hat = lam;
  sol.boundary = false;
  sol.J = -lam * q - F;
  sol.saddle_residual = std::abs(g);
  sol.bracket_lo = lo;
  sol.bracket_hi = hi;
  return sol;
}

DualSolution solve_shortfall(const MarketScenario& s, double q, bool use_grid,
                             GridParams grid_params) {
  const BenchmarkFeasibility feas = check_degenerate_benchmark(s, q);
  if (feas.degenerate && feas.safe_only_optimal)
    throw SolverError("benchmark is not volatile and inf(r - alpha) >= q: holding the safe "
                      "security alone is optimal; no decay rate is computed");

  const ConditionReport rep = check_all(s, default_probes(s.l), 5.0);

  DualSolution sol;
  if (!use_grid && s.is_affine()) {
    const MarketScenario lin = as_linear(s);
    RateOracle oracle = [&lin](double lam) {
      const RiccatiSolution rs = gaussian_rate(lam, lin);
      return std::make_pair(rs.F, gaussian_rate_derivative(lam, rs, lin));
    };
    sol = shortfall_rate(q, oracle, 1.0, rep.stability_passed);
    sol.gauss = gaussian_rate(sol.lambda_hat, lin);
  } else {
    if (s.kind != ScenarioKind::parametric_1d)
      throw std::invalid_argument(
          "nonlinear scenarios require the parametric_1d kind and the grid route");
    RateOracle oracle = [&s, &grid_params](double lam) {
      GridSolution gs = solve_ergodic_hjb(lam, s, grid_params);
      gs.m = stationary_density(lam, gs, s);
      return std::make_pair(gs.Lambda, grid_rate_derivative(lam, gs, s));
    };
    sol = shortfall_rate(q, oracle, 1.0, rep.stability_passed);
    GridSolution gs = solve_ergodic_hjb(sol.lambda_hat, s, grid_params);
    gs.m = stationary_density(sol.lambda_hat, gs, s);
    sol.grid = std::move(gs);
  }
  sol.q = q;
  return sol;
}

PortfolioPolicy build_policy(const DualSolution& sol, const MarketScenario& s) {
  PortfolioPolicy pol;
  pol.lambda_hat = sol.lambda_hat;
  if (sol.gauss) {
    const MarketScenario lin = as_linear(s);
    const double lam = sol.lambda_hat;
    const Matrix c = lin.b * lin.b.transpose();
    Eigen::LLT<Matrix> llt(c);
    const Matrix Atil = lin.lin.A1 - Vector::Ones(lin.n) * lin.lin.r1.transpose();
    const Vector atil = lin.lin.a2 - lin.lin.r2 * Vector::Ones(lin.n);
    pol.form = PortfolioPolicy::Form::linear;
    pol.K = llt.solve(Atil + lin.b * lin.sigma.transpose() * sol.gauss->P) / (1.0 + lam);
    pol.k0 = llt.solve(atil + lam * (lin.b * lin.beta) +
                       lin.b * lin.sigma.transpose() * sol.gauss->p2) /
             (1.0 + lam);
    return pol;
  }
  if (!sol.grid) throw std::invalid_argument("dual solution carries no artifacts");

  const GridSolution& gs = *sol.grid;
  pol.form = PortfolioPolicy::Form::tabulated;
  pol.xs = gs.xs;
  const int N = static_cast<int>(gs.xs.size());
  pol.u_table.resize(s.n, N);
  for (int i = 0; i < N; ++i) {
    const CoefficientFrame f = eval_coefficients(s, Vector::Constant(1, gs.xs(i)));
    pol.u_table.col(i) =
        optimal_portfolio(sol.lambda_hat, Vector::Constant(1, gs.fprime(i)), f);
  }
  return pol;
}

PortfolioPolicy truncate_policy(PortfolioPolicy policy, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("tau must be positive");
  policy.tau = tau;
  return policy;
}

PortfolioPolicy kelly_policy(const MarketScenario& s) {
  PortfolioPolicy pol;
  pol.lambda_hat = 0.0;
  if (s.kind == ScenarioKind::linear_gaussian) {
    const Matrix c = s.b * s.b.transpose();
    Eigen::LLT<Matrix> llt(c);
    pol.form = PortfolioPolicy::Form::linear;
    pol.K = llt.solve(s.lin.A1 - Vector::Ones(s.n) * s.lin.r1.transpose());
    pol.k0 = llt.solve(s.lin.a2 - s.lin.r2 * Vector::Ones(s.n));
    return pol;
  }
  if (s.is_affine()) return kelly_policy(as_linear(s));
  throw std::invalid_argument("tabulated Kelly policy requires a grid; use build_policy on a "
                              "lambda = 0 grid solution instead");
}

TruncationReport check_truncation_conditions(const DualSolution& sol, const MarketScenario& s,
                                             const std::vector<Vector>& probes) {
  TruncationReport report;
  const Matrix c = s.b * s.b.transpose();
  Eigen::LLT<Matrix> llt(c);

  auto grad_f = [&](const Vector& x) -> Vector {
    if (sol.gauss) return sol.gauss->P * x + sol.gauss->p2;
    const GridSolution& gs = *sol.grid;
    const int N = static_cast<int>(gs.xs.size());
    const double h = gs.xs(1) - gs.xs(0);
    int i = static_cast<int>(std::floor((x(0) - gs.xs(0)) / h));
    i = std::max(0, std::min(N - 2, i));
    const double t = (x(0) - gs.xs(i)) / h;
    return Vector::Constant(1, gs.fprime(i) * (1.0 - t) + gs.fprime(i + 1) * t);
  };

  for (double rho : {0.01, 0.1, 1.0}) {
    TruncationReport::Entry e;
    e.rho = rho;

    std::vector<double> rads, gvals;
    for (const Vector& x : probes) {
      const CoefficientFrame f = eval_coefficients(s, x);
      const Vector excess = f.a - Vector::Constant(s.n, f.r);
      const Vector bsg = f.b * (f.sigma.transpose() * grad_f(x));
      const double g =
          (1.0 + rho) * bsg.dot(llt.solve(bsg)) - excess.dot(llt.solve(excess));
      rads.push_back(x.norm());
      gvals.push_back(g);
    }

    // least-squares fits of g against (1, |x|) and (1, |x|, |x|^2)
    const int m = static_cast<int>(rads.size());
    Matrix X1(m, 2), X2(m, 3);
    Vector y(m);
    for (int i = 0; i < m; ++i) {
      X1(i, 0) = 1.0;
      X1(i, 1) = rads[i];
      X2(i, 0) = 1.0;
      X2(i, 1) = rads[i];
      X2(i, 2) = rads[i] * rads[i];
      y(i) = gvals[i];
    }
    const Vector beta1 = (X1.transpose() * X1).ldlt().solve(X1.transpose() * y);
    const Vector beta2 = (X2.transpose() * X2).ldlt().solve(X2.transpose() * y);
    e.fit_c2 = beta1(0);
    e.fit_c1 = beta1(1);
    e.fit_margin = (y - X1 * beta1).maxCoeff();
    e.quad_trend = beta2(2);

    // a flat-but-negative g also certifies decay in the sense that the
    // excess return always dominates the gradient loading
    const double scale = std::max(1e-12, y.cwiseAbs().maxCoeff());
    const double gmax = *std::max_element(gvals.begin(), gvals.end());
    if (sol.gauss) {
      // exact: leading quadratic coefficient matrix of g
      const MarketScenario lin = as_linear(s);
      const Matrix Atil = lin.lin.A1 - Vector::Ones(lin.n) * lin.lin.r1.transpose();
      const Matrix bsP = lin.b * lin.sigma.transpose() * sol.gauss->P;  // n x l
      const Matrix lead =
          (1.0 + rho) * bsP.transpose() * llt.solve(bsP) - Atil.transpose() * llt.solve(Atil);
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (lead + lead.transpose()));
      e.leading_max_eig = es.eigenvalues().maxCoeff();
      e.linear_growth_ok = e.leading_max_eig <= 1e-10;
      e.strong_decay_ok =
          e.leading_max_eig < 0.0 || (e.leading_max_eig <= 1e-10 && gmax < 0.0);
    } else {
      e.linear_growth_ok = e.quad_trend <= 1e-8 * scale;
      e.strong_decay_ok = e.quad_trend < -1e-8 * scale ||
                          (std::abs(e.quad_trend) <= 1e-8 * scale && gmax < 0.0);
    }
    report.entries.push_back(e);
  }
  return report;
}

double check_saddle(const DualSolution& sol, const MarketScenario& s) {
  const double lam = sol.lambda_hat;
  double value = 0;
  if (sol.gauss) {
    auto integrand = [&](const Vector& x) {
      const CoefficientFrame f = eval_coefficients(s.kind == ScenarioKind::linear_gaussian
                                                       ? s
                                                       : as_linear(s),
                                                   x);
      const Vector grad_f = sol.gauss->P * x + sol.gauss->p2;
      const Vector u = optimal_portfolio(lam, grad_f, f);
      const Vector vol = log_ratio_vol(u, f);
      return log_ratio_drift(u, f) - lam * vol.squaredNorm() + grad_f.dot(f.sigma * vol);
    };
    const QuadraticForm q = fit_quadratic(integrand, s.l);
    value = q.gaussian_expectation(sol.gauss->mstar, sol.gauss->Sigma);
  } else if (sol.grid) {
    // the integrand is the negative of the rate-derivative integrand
    value = -grid_rate_derivative(lam, *sol.grid, s);
  } else {
    throw std::invalid_argument("dual solution carries no artifacts");
  }
  if (sol.boundary) return std::max(0.0, value - sol.q);
  return std::abs(value - sol.q);
}

}  // namespace shortfall
