#pragma once

#include "fedtheory/objectives.hpp"
#include "fedtheory/random.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fedtheory {

struct SuiteOptions {
  std::uint64_t seed = 0;
  std::size_t trials = 0;  // 0: the suite's default
  double tolerance = 1e-9;
};

struct SuiteResult {
  std::string name;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double max_residual = 0.0;
  bool passed = false;
  std::vector<std::pair<std::string, std::string>> details;

  void note(const std::string& key, double value);
  void note(const std::string& key, const std::string& value);
};

/// Randomized LA-FedAVG rounds: d in {2, 10, 50}, 1..20 clients, mixed
/// solvers and random weights. Default 1000 trials.
SuiteResult theorem2_suite(const SuiteOptions& opts);
/// Randomized corrected rounds with random and oracle corrections. Default 1000.
SuiteResult theorem3_suite(const SuiteOptions& opts);
/// Randomized scalar-step momentum rounds. Default 1000.
SuiteResult theorem4_suite(const SuiteOptions& opts);
/// 10 random (a, X) families plus the point-mass case. Default 1e5 trials per family.
SuiteResult decoupling_suite(const SuiteOptions& opts);
/// 100 random configurations with positive pairwise cosines. `trials` is
/// the number of configurations.
SuiteResult bounds_suite(const SuiteOptions& opts);
/// Random quadratic populations and query points. Default 1e4.
SuiteResult lowerbound_suite(const SuiteOptions& opts);

const std::vector<std::string>& suite_names();  // without "all"
std::vector<SuiteResult> run_suite(const std::string& name, const SuiteOptions& opts);

/// Symmetric positive definite matrix with eigenvalues uniform in [lo, hi].
Matrix random_spd(Rng& rng, Eigen::Index d, double lo, double hi);
ModelVector random_gaussian(Rng& rng, Eigen::Index d, double scale = 1.0);

}  // namespace fedtheory
