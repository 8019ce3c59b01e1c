#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace shortfall {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Malformed or unreadable scenario file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix shapes inconsistent with the declared dimensions.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix that must be positive definite is not.
class DefinitenessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical solve failed (no stabilizing Riccati solution,
/// policy iteration stalled, root not bracketable, ...).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ScenarioKind { linear_gaussian, parametric_1d };

/// Scalar coefficient family coef(x) = c0 + c1*x + c2*tanh(c3*x).
/// Affine plus a bounded saturation term, so the coefficient always has
/// linear growth and bounded derivatives.
struct SaturatingCoeff {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;

  double operator()(double x) const { return c0 + c1 * x + c2 * std::tanh(c3 * x); }
  double slope(double x) const {
    const double t = std::tanh(c3 * x);
    return c1 + c2 * c3 * (1.0 - t * t);
  }
  bool is_affine() const { return c2 == 0.0 || c3 == 0.0; }
};

/// Affine coefficient functions for the linear-Gaussian scenario kind:
///   a(x) = A1 x + a2,  r(x) = r1.x + r2,  alpha(x) = alpha1.x + alpha2,
///   theta(x) = Theta1 x + theta2.
struct LinearCoeffs {
  Matrix A1;      // n x l
  Vector a2;      // n
  Vector r1;      // l
  double r2 = 0;
  Vector alpha1;  // l
  double alpha2 = 0;
  Matrix Theta1;  // l x l
  Vector theta2;  // l
};

/// Scalar-factor coefficient families (l = 1).
struct ParametricCoeffs {
  std::vector<SaturatingCoeff> a;  // one per risky asset
  SaturatingCoeff r;
  SaturatingCoeff alpha;
  SaturatingCoeff theta;
};

/// A full problem instance: n risky assets, an l-dimensional factor
/// diffusion driving the drift coefficients, a k-dimensional Wiener
/// process, and a volatile benchmark. Immutable after construction.
struct MarketScenario {
  int n = 0, l = 0, k = 0;
  ScenarioKind kind = ScenarioKind::linear_gaussian;
  LinearCoeffs lin;       // valid when kind == linear_gaussian
  ParametricCoeffs par;   // valid when kind == parametric_1d
  Matrix b;               // n x k, constant asset volatility loadings
  Vector beta;            // k, benchmark volatility loadings
  Matrix sigma;           // l x k, factor volatility
  Vector x0;              // l, deterministic initial factor value

  Matrix c() const { return b * b.transpose(); }
  bool is_affine() const;  // true for linear_gaussian, or parametric with c2*c3 == 0
};

/// Model coefficients evaluated at one factor point.
struct CoefficientFrame {
  Vector x;      // l
  Vector a;      // n
  double r = 0;
  double alpha = 0;
  Vector theta;  // l
  Matrix b;      // n x k
  Vector beta;   // k
  Matrix sigma;  // l x k
  Matrix c;      // n x n, = b b^T
};

struct LoadOptions {
  // Permit |beta| = 0 so the degenerate-benchmark feasibility check can
  // run; every other entry point rejects such scenarios.
  bool allow_degenerate_benchmark = false;
};

MarketScenario load_scenario(const std::filesystem::path& path, LoadOptions opts = {});
MarketScenario parse_scenario(const std::string& json_text, LoadOptions opts = {});
void save_scenario(const MarketScenario& s, const std::filesystem::path& path);
std::string scenario_to_json(const MarketScenario& s);

/// Validates dimensions and definiteness invariants; throws on violation.
void validate_scenario(const MarketScenario& s, LoadOptions opts = {});

CoefficientFrame eval_coefficients(const MarketScenario& s, const Vector& x);

/// Conversions between the two kinds when the coefficients are affine.
/// Round-trip helpers for cross-checking the closed-form and grid solvers.
MarketScenario as_linear(const MarketScenario& s);      // parametric_1d (affine) -> linear_gaussian
MarketScenario as_parametric(const MarketScenario& s);  // linear_gaussian (l = 1) -> parametric_1d

/// FNV-1a hash of the canonical JSON serialization; ties every report to
/// its exact input.
std::uint64_t scenario_digest(const MarketScenario& s);

}  // namespace shortfall
