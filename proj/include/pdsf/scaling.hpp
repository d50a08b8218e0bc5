#pragma once

#include <cstdint>
#include <vector>

#include "pdsf/dual.hpp"
#include "pdsf/explore.hpp"

// Diffusive rescaling of (dual) path families, the compactified path metric
// d_Pi, the Hausdorff distance on families, and the eta counting statistic.

namespace pdsf {

// A path after the scaling value(t) = source(n^2 gamma t) / (n sigma), stored
// as scaled knots. Forward paths run upward from sigma_pi; backward (dual)
// paths run downward from sigma_pi. Evaluation beyond the traced range extends
// the terminal value as a constant.
struct ScaledPath {
  std::vector<std::array<double, 2>> knots;  // (t, value), t ascending
  bool forward = true;
  int n = 1;
  double gamma = 1.0;
  double sigma = 1.0;

  double start_time() const { return forward ? knots.front()[0] : knots.back()[0]; }
  double value(double t) const;
};

ScaledPath scale_path(const DsfPath& path, int n, double gamma, double sigma);
ScaledPath scale_dual_path(const DualPath& path, int n, double gamma, double sigma);

struct PathFamily {
  std::vector<ScaledPath> paths;
  bool forward = true;
};

// Compactified locally-uniform metric; the sup is certified to 1e-6 by
// adaptive bisection with segment Lipschitz bounds.
double d_pi(const ScaledPath& p1, const ScaledPath& p2);
double d_hausdorff(const PathFamily& k1, const PathFamily& k2);

// Number of distinct positions at time t0+t among family paths born at or
// before t0 that pass through [a, b] at t0. Coalesced paths evaluate to
// bitwise-identical values, so exact equality counts merged paths once.
int eta_count(const PathFamily& family, double t0, double t, double a, double b);

struct GammaSigmaEstimate {
  double gamma_hat = 0.0;
  double sigma_hat = 0.0;
  double gamma_ci_half = 0.0;   // 95% normal-theory half-width
  double sigma2_ci_half = 0.0;  // for sigma_hat^2
  int trials_used = 0;
  int shortfalls = 0;  // trials without two renewals inside the budget
};

// sigma^2 = Var(Y_2(1)), gamma = E[vertical hat increment between tau_1 and
// tau_2], across fresh single-path runs from the origin.
GammaSigmaEstimate estimate_gamma_sigma(const FieldConfig& base, int trials,
                                        std::int64_t step_budget,
                                        const ExplorationParams& params);

}  // namespace pdsf
