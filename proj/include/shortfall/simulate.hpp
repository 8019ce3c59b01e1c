#pragma once

#include <optional>

#include "shortfall/dual.hpp"
#include "shortfall/quadratic.hpp"
#include "shortfall/scenario.hpp"

namespace shortfall {

enum class Measure { physical, tilted };

struct SimConfig {
  std::vector<double> t_list;  // increasing horizons
  double dt = 0.01;
  std::int64_t n_paths = 0;
  std::uint64_t seed = 0;
  Measure measure = Measure::physical;
  PortfolioPolicy policy;
  double q = 0;
};

/// Drift change of measure d(x) = -lambda_hat N(u_hat(x), x) + sigma^T grad_f(x).
/// Under the tilted dynamics the shortfall event is typical, so weighting
/// indicator paths by dP/dP~ estimates the physical probability with small
/// relative error.
struct DriftTilt {
  double lambda_hat = 0;
  PortfolioPolicy u_hat;
  bool linear_grad = true;
  Matrix P;            // grad_f(x) = P x + p2 (linear route)
  Vector p2;
  Vector xs, fprime;   // tabulated grad_f (grid route, l = 1)

  Vector grad_f(const Vector& x) const;
};
DriftTilt make_tilt(const DualSolution& sol, const MarketScenario& s);

struct MCEstimate {
  double t = 0;
  double p_hat = 0;
  double stderr_ = 0;
  double log_decay = 0;  // -log(p_hat)/t, NaN when p_hat = 0
  double ess = 0;        // effective sample size (= n_paths under the physical measure)
  std::int64_t flagged = 0;
};

/// Terminal data for every path at every horizon. L is indexed
/// [policy][horizon][path]; log-weights are shared across policies because
/// the tilt only changes the factor dynamics.
struct PathOutputs {
  std::vector<double> t;
  std::vector<std::vector<std::vector<double>>> L;
  std::vector<std::vector<double>> log_weight;  // [horizon][path], empty when physical
  std::vector<double> x_final;                  // terminal factor, path-major (l entries each)
  std::vector<std::uint8_t> flagged;            // per path
  std::int64_t flagged_count = 0;
};

/// Euler-Maruyama over the shared horizons; several policies may be
/// evaluated along the same driving noise (common random numbers). Path i
/// draws from an independent Philox stream keyed by (seed, i), so runs are
/// bit-reproducible for any worker count.
PathOutputs simulate_ensemble(const MarketScenario& s, const SimConfig& cfg,
                              const std::optional<DriftTilt>& tilt,
                              const std::vector<PortfolioPolicy>& policies);

/// Single-policy wrapper per the module contract.
PathOutputs simulate_paths(const MarketScenario& s, const SimConfig& cfg,
                           const std::optional<DriftTilt>& tilt);

/// Shortfall probability estimates per horizon. Physical measure: indicator
/// mean and binomial standard error. Tilted: weighted indicator mean,
/// sample standard error and (sum w)^2 / sum w^2 effective sample size.
std::vector<MCEstimate> estimates_from(const PathOutputs& out, int policy_index, double q,
                                       Measure measure);
std::vector<MCEstimate> estimate_shortfall(const MarketScenario& s, const SimConfig& cfg,
                                           const std::optional<DriftTilt>& tilt);

struct DecayRegression {
  double slope = 0;
  double intercept = 0;
  double stderr_ = 0;
  int points = 0;
};

/// Weighted least squares of -log p_hat against t; the slope estimates the
/// decay rate. Horizons with p_hat = 0 are dropped; needs >= 3 left.
DecayRegression estimate_decay_rate(const std::vector<MCEstimate>& estimates);

/// Time average of g along one long tilted path against its stationary
/// expectation; the standard error comes from batch means.
struct ErgodicAverage {
  double time_average = 0;
  double stderr_ = 0;
};
ErgodicAverage ergodic_average_diagnostic(const MarketScenario& s, const DriftTilt& tilt,
                                          const QuadraticForm& g, double t_total, double dt,
                                          std::uint64_t seed);

/// Worker-count cap from SHORTFALL_LD_THREADS (defaults to the hardware).
int worker_count();

}  // namespace shortfall
