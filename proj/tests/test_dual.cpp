#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "shortfall/dual.hpp"
#include "test_support.hpp"

using namespace shortfall;
using test::make_s1;
using test::make_s1_parametric;

namespace {

RateOracle s1_oracle() {
  return [](double lam) {
    const MarketScenario s = make_s1();
    const RiccatiSolution sol = gaussian_rate(lam, s);
    return std::make_pair(sol.F, gaussian_rate_derivative(lam, sol, s));
  };
}

// -F'(0+) for S1; thresholds above it make the shortfall non-rare
constexpr double kS1KellyGrowth = 0.0425;

}  // namespace

TEST_CASE("synthetic oracle: quadratic rate function has a closed-form dual") {
  // F(lambda) = lambda^2: for q < 0 the optimum is lambda = -q/2, J = q^2/4
  RateOracle oracle = [](double lam) { return std::make_pair(lam * lam, 2 * lam); };
  const DualSolution sol = shortfall_rate(-0.8, oracle);
  CHECK(!sol.boundary);
  CHECK(sol.lambda_hat == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(sol.J == doctest::Approx(0.16).epsilon(1e-9));
  CHECK(sol.saddle_residual <= 1e-8);

  const DualSolution bound = shortfall_rate(0.3, oracle);
  CHECK(bound.boundary);
  CHECK(bound.lambda_hat == 0.0);
  CHECK(bound.J == 0.0);
}

TEST_CASE("boundary solutions are refused without the stability certificate") {
  RateOracle oracle = [](double lam) { return std::make_pair(lam * lam, 2 * lam); };
  CHECK_THROWS_AS(shortfall_rate(0.3, oracle, 1.0, /*stability_ok=*/false), SolverError);
  CHECK_NOTHROW(shortfall_rate(-0.8, oracle, 1.0, /*stability_ok=*/false));
}

TEST_CASE("a rate function with bounded slope cannot be bracketed") {
  RateOracle oracle = [](double lam) { return std::make_pair(-lam, -1.0); };
  CHECK_THROWS_AS(shortfall_rate(0.5, oracle), SolverError);
}

TEST_CASE("S1 boundary case: generous thresholds are not exponentially rare") {
  const DualSolution sol = shortfall_rate(kS1KellyGrowth + 0.01, s1_oracle());
  CHECK(sol.boundary);
  CHECK(sol.J == 0.0);
}

TEST_CASE("S1 interior case: first-order condition holds to 1e-8") {
  const double q = kS1KellyGrowth - 0.01;
  const DualSolution sol = shortfall_rate(q, s1_oracle());
  CHECK(!sol.boundary);
  CHECK(sol.lambda_hat > 0);
  CHECK(sol.saddle_residual <= 1e-8);

  // dual value recomputable from the artifacts
  const auto [F, Fp] = s1_oracle()(sol.lambda_hat);
  CHECK(std::abs(Fp + q) <= 1e-8);
  CHECK(sol.J == doctest::Approx(-sol.lambda_hat * q - F).epsilon(1e-12));
}

TEST_CASE("J is nonincreasing and Lipschitz in q") {
  std::vector<double> qs, Js, lams;
  for (int i = 0; i <= 50; ++i) {
    const double q = -0.05 + 0.002 * i;
    const DualSolution sol = solve_shortfall(make_s1(), q);
    qs.push_back(q);
    Js.push_back(sol.J);
    lams.push_back(sol.lambda_hat);
  }
  const double lam_max = *std::max_element(lams.begin(), lams.end());
  for (size_t i = 0; i + 1 < Js.size(); ++i) {
    CHECK(Js[i + 1] <= Js[i] + 1e-10);
    CHECK(std::abs(Js[i + 1] - Js[i]) <= lam_max * (qs[i + 1] - qs[i]) + 1e-10);
  }
}

TEST_CASE("envelope: lambda_hat maximizes -lambda q - F(lambda)") {
  const double q = 0.02;
  const DualSolution sol = solve_shortfall(make_s1(), q);
  for (int i = 1; i <= 20; ++i) {
    const double lam = 0.37 * i;
    const double value = -lam * q - gaussian_rate(lam, make_s1()).F;
    CHECK(value <= sol.J + 1e-10);
  }
}

TEST_CASE("policy at lambda = 0 is the Kelly feedback") {
  const DualSolution sol = solve_shortfall(make_s1(), kS1KellyGrowth + 0.01);
  const PortfolioPolicy pol = build_policy(sol, make_s1());
  CHECK(pol.K(0, 0) == doctest::Approx(10.0).epsilon(1e-12));  // 0.4 / 0.04
  CHECK(pol.k0(0) == doctest::Approx(1.0).epsilon(1e-12));     // 0.04 / 0.04

  const PortfolioPolicy kelly = kelly_policy(make_s1());
  CHECK((pol.K - kelly.K).norm() < 1e-14);
  CHECK((pol.k0 - kelly.k0).norm() < 1e-14);
}

TEST_CASE("interior policy matches its defining coefficients") {
  const MarketScenario s = make_s1();
  const DualSolution sol = solve_shortfall(s, 0.02);
  REQUIRE(sol.gauss.has_value());
  const PortfolioPolicy pol = build_policy(sol, s);

  const double lam = sol.lambda_hat;
  const Matrix c = s.b * s.b.transpose();
  const Matrix K_expected =
      c.llt().solve(s.lin.A1 + s.b * s.sigma.transpose() * sol.gauss->P) / (1.0 + lam);
  const Vector k0_expected =
      c.llt().solve(s.lin.a2 - s.lin.r2 * Vector::Ones(1) + lam * (s.b * s.beta) +
                    s.b * s.sigma.transpose() * sol.gauss->p2) /
      (1.0 + lam);
  CHECK((pol.K - K_expected).norm() < 1e-12);
  CHECK((pol.k0 - k0_expected).norm() < 1e-12);

  // the policy evaluated through the hamiltonian module agrees pointwise
  for (double x : {-1.0, 0.0, 0.7}) {
    const Vector xv = Vector::Constant(1, x);
    const CoefficientFrame f = eval_coefficients(s, xv);
    const Vector grad_f = sol.gauss->P * xv + sol.gauss->p2;
    CHECK((pol.evaluate(xv) - optimal_portfolio(lam, grad_f, f)).norm() < 1e-13);
  }
}

TEST_CASE("grid-route dual solution and tabulated policy") {
  const MarketScenario par = make_s1_parametric();
  GridParams gp;
  gp.N = 801;
  gp.R = 0.8;
  const double q = 0.02;
  const DualSolution sol = solve_shortfall(par, q, /*use_grid=*/true, gp);
  REQUIRE(sol.grid.has_value());
  CHECK(!sol.boundary);
  CHECK(sol.saddle_residual <= 1e-8);

  // lambda_hat agrees with the closed-form route to grid accuracy
  const DualSolution exact = solve_shortfall(make_s1(), q);
  CHECK(sol.lambda_hat == doctest::Approx(exact.lambda_hat).epsilon(2e-3));
  CHECK(sol.J == doctest::Approx(exact.J).epsilon(2e-3));

  const PortfolioPolicy pol = build_policy(sol, par);
  REQUIRE(pol.form == PortfolioPolicy::Form::tabulated);
  const GridSolution& gs = *sol.grid;
  for (int i : {0, 173, 400, 777}) {
    const CoefficientFrame f = eval_coefficients(par, Vector::Constant(1, gs.xs(i)));
    const Vector expected =
        optimal_portfolio(sol.lambda_hat, Vector::Constant(1, gs.fprime(i)), f);
    CHECK((pol.u_table.col(i) - expected).norm() < 1e-13);
    CHECK((pol.evaluate(Vector::Constant(1, gs.xs(i))) - expected).norm() < 1e-13);
  }
}

TEST_CASE("gauge invariance: shifting f by a constant leaves the policy unchanged") {
  const MarketScenario par = make_s1_parametric();
  GridParams gp;
  gp.N = 801;
  gp.R = 0.8;
  DualSolution sol = solve_shortfall(par, 0.02, true, gp);
  const PortfolioPolicy before = build_policy(sol, par);
  sol.grid->f.array() += 3.7;  // fprime untouched
  const PortfolioPolicy after = build_policy(sol, par);
  CHECK((before.u_table - after.u_table).norm() == 0.0);
}

TEST_CASE("truncation semantics") {
  const MarketScenario s = make_s1();
  const DualSolution sol = solve_shortfall(s, 0.02);
  const PortfolioPolicy pol = build_policy(sol, s);

  CHECK(!std::isfinite(pol.tau));  // untruncated by default
  const PortfolioPolicy trunc = truncate_policy(pol, 0.5);
  const Vector at_tau = trunc.evaluate(Vector::Constant(1, 0.5));
  const Vector inside = trunc.evaluate(Vector::Constant(1, 0.49));
  const Vector outside = trunc.evaluate(Vector::Constant(1, 0.5 + 1e-9));
  CHECK((at_tau - pol.evaluate(Vector::Constant(1, 0.5))).norm() == 0.0);  // closed ball
  CHECK(inside.norm() > 0);
  CHECK(outside.norm() == 0.0);
  CHECK_THROWS_AS(truncate_policy(pol, -1.0), std::invalid_argument);
}

TEST_CASE("truncation growth conditions on S1 pass") {
  const MarketScenario s = make_s1();
  const DualSolution sol = solve_shortfall(s, 0.02);
  const TruncationReport rep =
      check_truncation_conditions(sol, s, default_probes(1, 5.0));
  REQUIRE(rep.entries.size() == 3);
  for (const auto& e : rep.entries) {
    CHECK(e.linear_growth_ok);
    CHECK(e.strong_decay_ok);
    CHECK(e.leading_max_eig < 0);
  }
}

TEST_CASE("constant-coefficient scenario passes trivially") {
  MarketScenario s = make_s1();
  s.lin.A1.setZero();  // excess return independent of the factor
  const DualSolution sol = solve_shortfall(s, 0.001);
  const TruncationReport rep =
      check_truncation_conditions(sol, s, default_probes(1, 5.0));
  for (const auto& e : rep.entries) {
    CHECK(e.linear_growth_ok);
    CHECK(e.strong_decay_ok);
  }
}

TEST_CASE("adversarial gradient loading defeats the strong decay condition") {
  // sigma nearly anti-parallel to b: the closed-loop gradient term
  // outweighs the excess return at moderate lambda
  MarketScenario s;
  s.n = 1;
  s.l = 1;
  s.k = 3;
  s.kind = ScenarioKind::linear_gaussian;
  s.lin.A1 = Matrix::Constant(1, 1, 1.0);
  s.lin.a2 = Vector::Constant(1, 0.05);
  s.lin.r1 = Vector::Zero(1);
  s.lin.r2 = 0.02;
  s.lin.alpha1 = Vector::Zero(1);
  s.lin.alpha2 = 0.02;
  s.lin.Theta1 = Matrix::Constant(1, 1, -0.8);
  s.lin.theta2 = Vector::Zero(1);
  s.b = (Matrix(1, 3) << 1.0, 0.0, 0.0).finished();
  s.sigma = (Matrix(1, 3) << -0.99, 0.14106735979665885, 0.0).finished();
  s.beta = (Vector(3) << 0.0, 0.0, 0.15).finished();
  s.x0 = Vector::Zero(1);
  validate_scenario(s);

  DualSolution sol;
  sol.lambda_hat = 5.0;
  sol.q = 0.0;
  sol.gauss = gaussian_rate(5.0, s);
  const TruncationReport rep = check_truncation_conditions(sol, s, default_probes(1, 5.0));
  bool any_fail = false;
  for (const auto& e : rep.entries) any_fail |= !e.strong_decay_ok;
  CHECK(any_fail);
}

TEST_CASE("saddle equality at an interior optimum (exact moments)") {
  const MarketScenario s = make_s1();
  const DualSolution sol = solve_shortfall(s, 0.02);
  CHECK(!sol.boundary);
  CHECK(check_saddle(sol, s) <= 1e-8);
}

TEST_CASE("saddle inequality at the boundary") {
  const MarketScenario s = make_s1();
  const DualSolution sol = solve_shortfall(s, kS1KellyGrowth + 0.02);
  CHECK(sol.boundary);
  CHECK(check_saddle(sol, s) <= 1e-8);  // slack of the inequality, clipped at zero
}

TEST_CASE("saddle equality through the grid quadrature") {
  const MarketScenario par = make_s1_parametric();
  GridParams gp;
  gp.N = 2001;
  gp.R = 0.8;
  const DualSolution sol = solve_shortfall(par, 0.02, true, gp);
  CHECK(check_saddle(sol, par) <= 1e-3);
}

TEST_CASE("degenerate benchmark: refusal only below the feasibility threshold") {
  MarketScenario s = make_s1();
  s.beta.setZero();
  // r - alpha = -0.01: safe-only optimal iff q <= -0.01
  CHECK_THROWS_AS(solve_shortfall(s, -0.02, false), SolverError);
}
