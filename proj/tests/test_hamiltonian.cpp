#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "test_support.hpp"

using namespace shortfall;
using test::make_s1;

namespace {

CoefficientFrame s1_frame(double x = 0.0) {
  return eval_coefficients(make_s1(), Vector::Constant(1, x));
}

}  // namespace

TEST_CASE("log_ratio_drift values on S1") {
  const CoefficientFrame f = s1_frame();
  CHECK(log_ratio_drift(Vector::Zero(1), f) == doctest::Approx(0.0025).epsilon(1e-14));

  // u = 1: 1*0.04 - 0.5*0.04 + 0.0025
  CHECK(log_ratio_drift(Vector::Constant(1, 1.0), f) ==
        doctest::Approx(0.04 - 0.02 + 0.0025).epsilon(1e-14));

  // completed square: the Kelly portfolio adds half the squared c-norm
  const Vector kelly = f.c.llt().solve(f.a - Vector::Constant(1, f.r));
  const double expected =
      0.5 * (f.a - Vector::Constant(1, f.r)).dot(kelly) + f.r - f.alpha +
      0.5 * f.beta.squaredNorm();
  CHECK(log_ratio_drift(kelly, f) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("u = 0 drift only sees the safe rate, the benchmark and its variance") {
  std::mt19937_64 rng(5);
  const MarketScenario s = test::random_linear_scenario(rng, 2, 2);
  const CoefficientFrame f = eval_coefficients(s, test::randn_vector(rng, 2, 1.0));
  CHECK(log_ratio_drift(Vector::Zero(2), f) ==
        doctest::Approx(f.r - f.alpha + 0.5 * f.beta.squaredNorm()).epsilon(1e-13));
}

TEST_CASE("log_ratio_vol values") {
  const CoefficientFrame f = s1_frame();
  CHECK((log_ratio_vol(Vector::Zero(1), f) + f.beta).norm() == 0.0);
  const Vector v = log_ratio_vol(Vector::Constant(1, 1.0), f);
  CHECK(v(0) == doctest::Approx(0.15).epsilon(1e-14));
  CHECK(v(1) == 0.0);
  CHECK(v(2) == doctest::Approx(-0.15).epsilon(1e-14));
}

TEST_CASE("optimal portfolio at lambda = 0, p = 0 is the Kelly weight") {
  const CoefficientFrame f = s1_frame();
  const Vector u = optimal_portfolio(0.0, Vector::Zero(1), f);
  CHECK(u(0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("optimal portfolio approaches c^{-1} b beta as lambda grows") {
  const CoefficientFrame f = s1_frame();
  const Vector target = f.c.llt().solve(f.b * f.beta);
  const Vector u = optimal_portfolio(1e9, Vector::Constant(1, 0.3), f);
  CHECK((u - target).norm() < 1e-7);
}

TEST_CASE("optimized Hamiltonian closed form: special values on S1") {
  const CoefficientFrame f = s1_frame();

  // lambda = 0: only the gradient terms survive
  const Vector p = Vector::Constant(1, 0.7);
  const double h0 = optimized_hamiltonian(0.0, p, f);
  CHECK(h0 == doctest::Approx(p.dot(f.theta) + 0.5 * (f.sigma.transpose() * p).squaredNorm())
                  .epsilon(1e-14));

  // p = 0, lambda = 1
  const Vector shifted = f.a - Vector::Constant(1, f.r) + f.b * f.beta;
  const double expected = -0.25 * shifted.dot(f.c.llt().solve(shifted)) -
                          (f.r - f.alpha + 0.5 * f.beta.squaredNorm()) +
                          0.5 * f.beta.squaredNorm();
  CHECK(optimized_hamiltonian(1.0, Vector::Zero(1), f) ==
        doctest::Approx(expected).epsilon(1e-13));
  CHECK(optimized_hamiltonian(1.0, Vector::Zero(1), f) ==
        doctest::Approx(-0.005625).epsilon(1e-12));
}

TEST_CASE("closed form matches the independent maximization oracle") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const int l = 1 + static_cast<int>(rng() % 2);
    const int n = 1 + static_cast<int>(rng() % 2);
    const MarketScenario s = test::random_linear_scenario(rng, l, n);
    const CoefficientFrame f = eval_coefficients(s, test::randn_vector(rng, l, 1.5));
    const double lambda = std::uniform_real_distribution<double>(0.0, 4.0)(rng);
    const Vector p = test::randn_vector(rng, l, 1.0);

    const double sup = test::brute_force_inner_sup(lambda, p, f);
    const double via_sup = -lambda * sup + p.dot(f.theta) +
                           0.5 * (f.sigma.transpose() * p).squaredNorm();
    CHECK(optimized_hamiltonian(lambda, p, f) == doctest::Approx(via_sup).epsilon(1e-8));
  }
}

TEST_CASE("envelope property: any portfolio gives an upper bound, tight at the optimum") {
  std::mt19937_64 rng(29);
  const MarketScenario s = test::random_linear_scenario(rng, 2, 2);
  for (int trial = 0; trial < 30; ++trial) {
    const CoefficientFrame f = eval_coefficients(s, test::randn_vector(rng, 2, 1.0));
    const double lambda = std::uniform_real_distribution<double>(0.05, 3.0)(rng);
    const Vector p = test::randn_vector(rng, 2, 1.0);
    const double H = optimized_hamiltonian(lambda, p, f);

    auto bound_at = [&](const Vector& u) {
      const Vector vol = log_ratio_vol(u, f);
      const double inner = log_ratio_drift(u, f) - 0.5 * lambda * vol.squaredNorm() +
                           p.dot(f.sigma * vol);
      return -lambda * inner + p.dot(f.theta) +
             0.5 * (f.sigma.transpose() * p).squaredNorm();
    };
    const Vector u_rand = test::randn_vector(rng, 2, 2.0);
    CHECK(bound_at(u_rand) >= H - 1e-10);
    CHECK(bound_at(optimal_portfolio(lambda, p, f)) == doctest::Approx(H).epsilon(1e-11));
  }
}

TEST_CASE("midpoint convexity in (lambda, p)") {
  std::mt19937_64 rng(31);
  const MarketScenario s = test::random_linear_scenario(rng, 2, 1);
  const CoefficientFrame f = eval_coefficients(s, test::randn_vector(rng, 2, 1.0));
  for (int trial = 0; trial < 50; ++trial) {
    const double l1 = std::uniform_real_distribution<double>(0.0, 4.0)(rng);
    const double l2 = std::uniform_real_distribution<double>(0.0, 4.0)(rng);
    const Vector p1 = test::randn_vector(rng, 2, 1.5);
    const Vector p2 = test::randn_vector(rng, 2, 1.5);
    const double mid = optimized_hamiltonian(0.5 * (l1 + l2), 0.5 * (p1 + p2), f);
    const double avg =
        0.5 * optimized_hamiltonian(l1, p1, f) + 0.5 * optimized_hamiltonian(l2, p2, f);
    CHECK(mid <= avg + 1e-11);
  }
}

TEST_CASE("quadratic-in-p structure with Hessian T_lambda") {
  std::mt19937_64 rng(37);
  const MarketScenario s = test::random_linear_scenario(rng, 3, 2);
  const CoefficientFrame f = eval_coefficients(s, test::randn_vector(rng, 3, 1.0));
  for (double lambda : {0.0, 0.3, 1.0, 7.0}) {
    const Matrix T = effective_diffusion(lambda, f);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector p = test::randn_vector(rng, 3, 1.5);
      const double h = optimized_hamiltonian(lambda, p, f);
      const double h0 = optimized_hamiltonian(lambda, Vector::Zero(3), f);
      const double hm = optimized_hamiltonian(lambda, -p, f);
      // symmetric difference recovers the linear part exactly for a quadratic
      const double linear = 0.5 * (h - hm);
      CHECK(h - h0 - linear == doctest::Approx(0.5 * p.dot(T * p)).epsilon(1e-12));
    }
  }
}

TEST_CASE("effective diffusion: endpoints and monotone floor on S1") {
  const CoefficientFrame f = s1_frame();
  CHECK((effective_diffusion(0.0, f) - f.sigma * f.sigma.transpose()).norm() < 1e-15);
  CHECK(effective_diffusion(1e12, f)(0, 0) == doctest::Approx(0.0064).epsilon(1e-9));
  for (double lambda : {0.0, 0.1, 1.0, 10.0, 1000.0}) {
    CHECK(effective_diffusion(lambda, f)(0, 0) >= 0.0064 - 1e-12);
  }
}

TEST_CASE("policy Hamiltonian: envelope identity at the optimizer") {
  std::mt19937_64 rng(41);
  const MarketScenario s = test::random_linear_scenario(rng, 2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const CoefficientFrame f = eval_coefficients(s, test::randn_vector(rng, 2, 1.0));
    const double lambda = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    const Vector grad = test::randn_vector(rng, 2, 1.0);
    const Matrix hess = test::randn_matrix(rng, 2, 2, 0.5);
    const Vector v = optimal_portfolio(lambda, grad, f);
    const double lhs = policy_hamiltonian(lambda, grad, hess, v, f);
    const double rhs = optimized_hamiltonian(lambda, grad, f) +
                       0.5 * (f.sigma * f.sigma.transpose() * hess).trace();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("policy Hamiltonian: degenerate and zero-control values") {
  const CoefficientFrame f = s1_frame();
  CHECK(policy_hamiltonian(0.0, Vector::Zero(1), Matrix::Zero(1, 1), Vector::Zero(1), f) ==
        0.0);
  for (double lambda : {0.5, 2.0}) {
    const double expected = -lambda * (f.r - f.alpha + 0.5 * f.beta.squaredNorm()) +
                            0.5 * lambda * lambda * f.beta.squaredNorm();
    CHECK(policy_hamiltonian(lambda, Vector::Zero(1), Matrix::Zero(1, 1), Vector::Zero(1),
                             f) == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("policy Hamiltonian is affine in the Hessian and quadratic in the gradient") {
  std::mt19937_64 rng(43);
  const MarketScenario s = test::random_linear_scenario(rng, 2, 1);
  const CoefficientFrame f = eval_coefficients(s, test::randn_vector(rng, 2, 1.0));
  const double lambda = 1.3;
  const Vector v = test::randn_vector(rng, 1, 1.0);
  const Matrix ss = f.sigma * f.sigma.transpose();

  const Matrix h1 = test::randn_matrix(rng, 2, 2, 1.0);
  const Matrix h2 = test::randn_matrix(rng, 2, 2, 1.0);
  const Vector g = test::randn_vector(rng, 2, 1.0);
  const double base = policy_hamiltonian(lambda, g, Matrix::Zero(2, 2), v, f);
  CHECK(policy_hamiltonian(lambda, g, h1 + h2, v, f) ==
        doctest::Approx(base + 0.5 * (ss * (h1 + h2)).trace()).epsilon(1e-12));

  // quadratic in grad_f with Hessian sigma sigma^T
  const Vector g2 = test::randn_vector(rng, 2, 1.0);
  const double fpp = policy_hamiltonian(lambda, g + g2, Matrix::Zero(2, 2), v, f);
  const double fmm = policy_hamiltonian(lambda, g - g2, Matrix::Zero(2, 2), v, f);
  CHECK(fpp + fmm - 2 * base == doctest::Approx(g2.dot(ss * g2)).epsilon(1e-12));
}
