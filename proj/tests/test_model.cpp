#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "test_support.hpp"

using namespace shortfall;
using test::make_s1;

TEST_CASE("load_scenario parses S1 and checks c = b b^T") {
  const MarketScenario s = load_scenario(std::string(TEST_DATA_DIR) + "/s1.json");
  CHECK(s.n == 1);
  CHECK(s.l == 1);
  CHECK(s.k == 3);
  CHECK(s.c()(0, 0) == doctest::Approx(0.04).epsilon(1e-15));
  CHECK(s.lin.Theta1(0, 0) == -0.5);
  CHECK(s.x0(0) == 0.0);
}

TEST_CASE("degenerate asset volatility is rejected") {
  MarketScenario s = make_s1();
  s.b.setZero();
  CHECK_THROWS_AS(validate_scenario(s), DefinitenessError);
}

TEST_CASE("shape mismatches are rejected") {
  MarketScenario s = make_s1();
  s.lin.A1 = Matrix::Zero(2, 1);  // n = 1 but two rows
  CHECK_THROWS_AS(validate_scenario(s), DimensionError);

  // schema-level mismatch through the parser
  std::string text = scenario_to_json(make_s1());
  const auto pos = text.find("\"A1\": [");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 7, "\"A1\": [[0.4],");
  CHECK_THROWS_AS(parse_scenario(text), DimensionError);
}

TEST_CASE("missing file and malformed text raise ParseError") {
  CHECK_THROWS_AS(load_scenario("/nonexistent/file.json"), ParseError);
  CHECK_THROWS_AS(parse_scenario("{not json"), ParseError);
  CHECK_THROWS_AS(parse_scenario("{\"kind\": \"linear_gaussian\"}"), ParseError);
}

TEST_CASE("benchmark without volatility is rejected unless explicitly allowed") {
  MarketScenario s = make_s1();
  s.beta.setZero();
  CHECK_THROWS_AS(validate_scenario(s), DefinitenessError);
  CHECK_NOTHROW(validate_scenario(s, {.allow_degenerate_benchmark = true}));
}

TEST_CASE("eval_coefficients: affine values at probe points") {
  const MarketScenario s = make_s1();
  const CoefficientFrame f0 = eval_coefficients(s, Vector::Zero(1));
  CHECK(f0.a(0) == doctest::Approx(0.07).epsilon(1e-15));
  CHECK(f0.r == doctest::Approx(0.03).epsilon(1e-15));
  CHECK(f0.alpha == doctest::Approx(0.04).epsilon(1e-15));
  CHECK(f0.theta(0) == 0.0);

  const CoefficientFrame f1 = eval_coefficients(s, Vector::Constant(1, 1.0));
  CHECK(f1.a(0) == doctest::Approx(0.47).epsilon(1e-15));
  CHECK(f1.theta(0) == doctest::Approx(-0.5).epsilon(1e-15));

  const CoefficientFrame f2 = eval_coefficients(s, Vector::Constant(1, -2.0));
  CHECK(f2.theta(0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("affinity of linear coefficients along segments") {
  std::mt19937_64 rng(7);
  const MarketScenario s = test::random_linear_scenario(rng, 3, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = test::randn_vector(rng, 3, 2.0);
    const Vector y = test::randn_vector(rng, 3, 2.0);
    const double t = std::uniform_real_distribution<double>(0, 1)(rng);
    const CoefficientFrame fx = eval_coefficients(s, x);
    const CoefficientFrame fy = eval_coefficients(s, y);
    const CoefficientFrame fm = eval_coefficients(s, t * x + (1 - t) * y);
    CHECK((fm.a - (t * fx.a + (1 - t) * fy.a)).norm() < 1e-12);
    CHECK(fm.r == doctest::Approx(t * fx.r + (1 - t) * fy.r).epsilon(1e-12));
    CHECK(fm.alpha == doctest::Approx(t * fx.alpha + (1 - t) * fy.alpha).epsilon(1e-12));
    CHECK((fm.theta - (t * fx.theta + (1 - t) * fy.theta)).norm() < 1e-12);
  }
}

TEST_CASE("frame consistency: c equals b b^T at sampled points") {
  std::mt19937_64 rng(11);
  const MarketScenario s = test::random_linear_scenario(rng, 2, 3);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector x = test::randn_vector(rng, 2, 3.0);
    const CoefficientFrame f = eval_coefficients(s, x);
    CHECK((f.c - s.b * s.b.transpose()).norm() == 0.0);
  }
}

TEST_CASE("save/load round trip is bit exact") {
  std::mt19937_64 rng(13);
  for (const MarketScenario& s :
       {make_s1(), test::random_linear_scenario(rng, 2, 2), test::make_s1_parametric()}) {
    const auto tmp = std::filesystem::temp_directory_path() / "shortfall_roundtrip.json";
    save_scenario(s, tmp);
    const MarketScenario r = load_scenario(tmp);
    REQUIRE(r.kind == s.kind);
    CHECK(scenario_to_json(r) == scenario_to_json(s));
    CHECK(scenario_digest(r) == scenario_digest(s));
    if (s.kind == ScenarioKind::linear_gaussian) {
      CHECK((r.lin.A1 - s.lin.A1).norm() == 0.0);
      CHECK((r.lin.Theta1 - s.lin.Theta1).norm() == 0.0);
      CHECK(r.lin.r2 == s.lin.r2);
    }
    CHECK((r.b - s.b).norm() == 0.0);
    CHECK((r.beta - s.beta).norm() == 0.0);
    CHECK((r.sigma - s.sigma).norm() == 0.0);
    std::filesystem::remove(tmp);
  }
}

TEST_CASE("parametric evaluation and saturation slope") {
  MarketScenario s = test::make_s1_parametric();
  s.par.a[0] = {0.07, 0.4, 0.02, 2.0};  // add a tanh component
  const CoefficientFrame f = eval_coefficients(s, Vector::Constant(1, 0.3));
  CHECK(f.a(0) == doctest::Approx(0.07 + 0.4 * 0.3 + 0.02 * std::tanh(0.6)).epsilon(1e-15));
  CHECK(!s.is_affine());
  CHECK_THROWS_AS(as_linear(s), std::invalid_argument);
}

TEST_CASE("linear <-> parametric conversions agree pointwise") {
  const MarketScenario lin = make_s1();
  const MarketScenario par = as_parametric(lin);
  const MarketScenario back = as_linear(par);
  for (double x : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
    const Vector xv = Vector::Constant(1, x);
    const CoefficientFrame fl = eval_coefficients(lin, xv);
    const CoefficientFrame fp = eval_coefficients(par, xv);
    const CoefficientFrame fb = eval_coefficients(back, xv);
    CHECK(fl.a(0) == doctest::Approx(fp.a(0)).epsilon(1e-15));
    CHECK(fl.r == doctest::Approx(fp.r).epsilon(1e-15));
    CHECK(fl.theta(0) == doctest::Approx(fp.theta(0)).epsilon(1e-15));
    CHECK(fb.a(0) == doctest::Approx(fl.a(0)).epsilon(1e-15));
  }
}
