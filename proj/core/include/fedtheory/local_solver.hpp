#pragma once

#include "fedtheory/objectives.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fedtheory {

enum class LocalMethod { exact_solve, gd, sgd, nesterov };

LocalMethod parse_local_method(const std::string& name);
std::string to_string(LocalMethod method);

struct LocalSolverConfig {
  LocalMethod method = LocalMethod::gd;
  std::size_t steps = 1;
  double local_lr = 0.1;
  std::optional<std::size_t> batch_size;  // sgd only
  std::uint64_t noise_seed = 0;
};

struct LocalRunResult {
  ModelVector x_end;
  double sigma = 0.0;
  bool sigma_exceeds_one = false;
  ModelVector delta_start;
  ModelVector delta_end;
  /// Total displacement contributed by the correction, eta_l * K * h.
  ModelVector applied_correction;
  /// -eta_l * sum_k (batch gradient - full gradient); zero for full-batch methods.
  ModelVector noise_aggregate;
};

/// Runs K local steps from x_start. When `correction` (h) is given, every
/// step adds eta_l * h. delta_start / delta_end are measured against the
/// client's optimum with the correction displacement removed, so
/// x_end = (x_start - delta_start + delta_end) + applied_correction.
LocalRunResult run_local(const Objective& obj, const ModelVector& x_start,
                         const LocalSolverConfig& cfg,
                         const std::optional<ModelVector>& correction = std::nullopt);

struct SigmaSample {
  std::size_t steps = 0;
  double sigma = 0.0;
};

/// Empirical sigma for each K, starting from x_start.
std::vector<SigmaSample> sigma_order_check(const Objective& obj, const ModelVector& x_start,
                                           LocalSolverConfig cfg,
                                           const std::vector<std::size_t>& k_values);

}  // namespace fedtheory
