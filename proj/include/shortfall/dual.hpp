#pragma once

#include <functional>
#include <limits>
#include <optional>

#include "shortfall/bellman1d.hpp"
#include "shortfall/gaussian.hpp"

namespace shortfall {

/// lambda -> (F(lambda), F'(lambda)).
using RateOracle = std::function<std::pair<double, double>(double)>;

/// Result of the outer dual optimization J = sup_{lambda>=0}(-lambda q - F(lambda)).
struct DualSolution {
  double q = 0;
  double lambda_hat = 0;
  double J = 0;
  bool boundary = false;          // true iff lambda_hat = 0
  double saddle_residual = 0;     // |F'(lambda_hat) + q| interior, max(0, -q - F'(0+)) at 0
  double bracket_lo = 0, bracket_hi = 0;
  std::optional<RiccatiSolution> gauss;  // artifacts at lambda_hat (closed-form route)
  std::optional<GridSolution> grid;      // artifacts at lambda_hat (grid route)
};

/// Stationary feedback portfolio x -> u(x): either linear K x + k0 or a
/// tabulated curve with linear interpolation, optionally zeroed outside
/// |x| <= tau.
struct PortfolioPolicy {
  enum class Form { linear, tabulated };
  double lambda_hat = 0;
  Form form = Form::linear;
  Matrix K;   // n x l
  Vector k0;  // n
  Vector xs;  // tabulated nodes (l = 1)
  Matrix u_table;  // n x N
  double tau = std::numeric_limits<double>::infinity();

  Vector evaluate(const Vector& x) const;
};

/// Solves sup_{lambda>=0}(-lambda q - F(lambda)). Boundary case when
/// F'(0+) >= -q; otherwise brackets the root of F'(lambda) + q by
/// doubling and closes in with bisection plus secant acceleration.
/// stability_ok gates the boundary case: a lambda_hat = 0 solution is only
/// valid under the inward-drift condition, so we refuse it otherwise.
DualSolution shortfall_rate(double q, const RateOracle& oracle, double lmax_init = 1.0,
                            bool stability_ok = true);

/// Scenario-level driver: builds the closed-form or grid oracle, runs the
/// dual optimization and attaches the artifacts at lambda_hat.
DualSolution solve_shortfall(const MarketScenario& s, double q, bool use_grid = false,
                             GridParams grid_params = {});

PortfolioPolicy build_policy(const DualSolution& sol, const MarketScenario& s);
PortfolioPolicy truncate_policy(PortfolioPolicy policy, double tau);

/// Kelly (log-optimal) feedback, the lambda = 0 policy.
PortfolioPolicy kelly_policy(const MarketScenario& s);

/// Growth diagnostics for the truncation conditions: for each rho the
/// probe values of g(x) = (1+rho) |b sigma^T grad_f|^2_{c^-1} - |a - r 1|^2_{c^-1},
/// a least-squares linear-in-|x| fit, and, in the linear case, the exact
/// leading quadratic coefficient matrix whose negative definiteness
/// certifies the strong (limit -infinity) condition.
struct TruncationReport {
  struct Entry {
    double rho = 0;
    double fit_c1 = 0, fit_c2 = 0;   // g(x) <= c1 |x| + c2 least-squares fit
    double fit_margin = 0;           // max residual above the fit
    double quad_trend = 0;           // coefficient of |x|^2 in a quadratic fit
    double leading_max_eig = std::numeric_limits<double>::quiet_NaN();  // linear case only
    bool linear_growth_ok = false;   // no super-linear upward trend
    bool strong_decay_ok = false;    // g -> -infinity proxy
  };
  std::vector<Entry> entries;
};
TruncationReport check_truncation_conditions(const DualSolution& sol, const MarketScenario& s,
                                             const std::vector<Vector>& probes);

/// |E_m[M(u) - lambda |N(u)|^2 + grad_f . sigma N(u)] - q| at an interior
/// optimum (exact Gaussian moments or grid quadrature); at the boundary
/// returns max(0, value - q), the slack of the saddle inequality.
double check_saddle(const DualSolution& sol, const MarketScenario& s);

}  // namespace shortfall
