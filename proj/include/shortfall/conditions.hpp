#pragma once

#include "shortfall/scenario.hpp"

namespace shortfall {

struct ConditionThresholds {
  double positivity = 1e-10;  // "bounded away from zero" cutoff
};

/// Numerical certificate for the standing hypotheses: uniform ellipticity
/// of bb^T and sigma sigma^T, nondegeneracy of the benchmark relative to
/// the hedgeable directions, and inward drift of the factor.
struct ConditionReport {
  double ellipticity_min_eig_c = 0;   // min eig of b b^T
  double ellipticity_min_eig_ss = 0;  // min eig of sigma sigma^T
  double n1_min_eig = 0;              // min over probes of min eig of sigma Q1 sigma^T
  double n2_min_value = 0;            // min over probes of beta^T Q2 beta
  double stability_margin = 0;        // see check_all
  bool ellipticity_c_passed = false;
  bool ellipticity_ss_passed = false;
  bool n1_passed = false;
  bool n2_passed = false;
  bool stability_passed = false;

  bool all_passed() const {
    return ellipticity_c_passed && ellipticity_ss_passed && n1_passed && n2_passed &&
           stability_passed;
  }
};

/// Q1 = I_k - b^T c^{-1} b: orthogonal projector onto the null space of b.
Matrix nullspace_projector(const Matrix& b, const Matrix& c);

/// Q2 = Q1 (I_k - sigma^T (sigma Q1 sigma^T)^{-1} sigma) Q1: projects onto
/// the part of null(b) that the factor noise cannot span either; beta^T Q2
/// beta measures the benchmark volatility that no portfolio can hedge.
Matrix unhedgeable_projector(const Matrix& b, const Matrix& c, const Matrix& sigma);

/// Evaluates all checks on the probe set. For linear scenarios the
/// stability check is exact (Theta1 Hurwitz) and stability_margin is the
/// largest real part of its eigenvalues; for parametric scenarios the
/// margin is the maximum of theta(x).x/|x|^2 over the shell |x| =
/// shell_radius (inward drift requires it negative).
ConditionReport check_all(const MarketScenario& s, const std::vector<Vector>& probes,
                          double shell_radius, ConditionThresholds thresholds = {});

/// Origin, +/- unit directions and scaled copies; enough probes for
/// constant-volatility scenarios where Q1, Q2 do not vary with x.
std::vector<Vector> default_probes(int l, double radius = 5.0);

/// Feasibility of a non-volatile benchmark (beta = 0): the machinery
/// applies only when inf_x (r(x) - alpha(x)) < q; otherwise holding the
/// safe security alone is optimal and no rate is computed.
struct BenchmarkFeasibility {
  bool degenerate = false;        // |beta| = 0
  double inf_r_minus_alpha = 0;   // -inf when unbounded below
  bool safe_only_optimal = false; // degenerate and inf >= q
};
BenchmarkFeasibility check_degenerate_benchmark(const MarketScenario& s, double q);

}  // namespace shortfall
