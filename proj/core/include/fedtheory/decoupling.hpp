#pragma once

#include "fedtheory/random.hpp"
#include "fedtheory/theory.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fedtheory {

struct DecouplingBoundReport {
  // Monte-Carlo side
  double mc_lhs = 0.0;
  double mc_rhs = 0.0;
  double mc_stderr = 0.0;  // stderr of the paired difference (decoupling) or of E[Delta] (bounds)
  std::size_t trials = 0;
  // Bound side (expected_descent_bounds only)
  double analytic = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double epsilon = 0.0;
  double min_cos = 0.0;
  double max_cos = 0.0;
  double sigma_sq_min = 0.0;
  double sigma_sq_max = 0.0;
  bool applicable = true;

  /// |lhs - rhs| <= k stderr for the decoupling check.
  bool equal_within(double k = 3.0) const;
  /// lower - k stderr <= E[Delta] <= upper + k stderr.
  bool contained(double k = 3.0) const;
};

/// One joint draw of (X_1, ..., X_n), each X_i a vector.
using VectorFamilySampler = std::function<std::vector<ModelVector>(Rng&)>;

enum class SelectorMode {
  sampled,    // Bernoulli(1/2) selectors drawn per trial
  averaged,   // exact expectation over selectors: weight 1/4 per ordered pair
};

/// E sum_{i != j} a_ij <X_i, X_j>  versus  4 E sum_{i in I, j in I^c} a_ij <X_i, X'_j>,
/// X' an independent copy. a must have a zero diagonal.
DecouplingBoundReport decoupling_check(const Matrix& a, const VectorFamilySampler& sample,
                                       std::size_t trials, std::uint64_t seed,
                                       SelectorMode selectors = SelectorMode::sampled);

/// Expected descent when each delta^K_i is uniform in the ball of radius
/// ||delta_i|| around the client optimum, against the corollary's interval
///   rho_min^2 M_min ||delta_min||^2 <= E[Delta] / |S|^2 <= rho_max^2 M_max ||delta_max||^2
///   M_min = (1 - s_max) / |S| + 4 eps (1 - eps) min cos
///   M_max = (1 - s_min) / |S| + max cos,  s = E[sigma^2].
/// Reported in the 1/|S|^2 convention, descent positive. eps satisfies
/// 4 eps (1 - eps) = (|S| - 1) / |S|, the selector-averaged split fraction.
DecouplingBoundReport expected_descent_bounds(std::span<const ClientRoundRecord> records,
                                              std::size_t ball_trials, std::uint64_t seed);

/// Uniform draw from the ball of the given radius in R^d.
ModelVector uniform_in_ball(Rng& rng, Eigen::Index d, double radius);

}  // namespace fedtheory
