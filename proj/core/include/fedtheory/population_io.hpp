#pragma once

#include "fedtheory/objectives.hpp"
#include "fedtheory/partition.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

namespace fedtheory {

/// Population file:
///   {"dim": d,
///    "clients": [{"type": "quadratic", "center": [..], "curvature": "identity" | [[..], ..],
///                 "scale": 1.0, "offset": 0.0},
///                {"type": "logistic", "data_ref": "data.json", "indices": [..], "l2_reg": 0.01}],
///    "weights": [..]}                       // optional, uniform when absent
/// data_ref paths are resolved against `base_dir`.
ClientPopulation load_population(const std::filesystem::path& path);
ClientPopulation parse_population(const std::string& json_text,
                                  const std::filesystem::path& base_dir = ".");

/// Dataset file: {"num_classes": k, "features": [[..], ..], "labels": [..]}.
LabeledDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const LabeledDataset& data, const std::filesystem::path& path);

enum class OptimumDistribution { gaussian, laplace, mixed };

OptimumDistribution parse_optimum_distribution(const std::string& name);

/// Paraboloid clients f_i(x) = (curvature / 2) ||x - x*_i||^2 (curvature 2
/// gives (x - x*_i)^2), optima drawn around `mean` with the given scale.
/// In mixed mode the first half are Gaussian and the rest Laplace.
struct ParaboloidSpec {
  std::size_t num_clients = 20;
  Eigen::Index dim = 2;
  OptimumDistribution distribution = OptimumDistribution::mixed;
  double scale = 1.0;
  double curvature = 2.0;
  std::uint64_t seed = 0;
};

ClientPopulation make_paraboloid(const ParaboloidSpec& spec);

struct LogisticDirichletSpec {
  std::size_t num_clients = 10;
  double alpha = 1.0;
  int num_classes = 10;
  std::size_t samples_per_class = 100;
  Eigen::Index feature_dim = 5;
  double class_separation = 3.0;
  double l2_reg = 1e-2;
  std::size_t min_threshold = 1;
  bool weights_by_samples = false;
  std::uint64_t seed = 0;
};

struct LogisticPopulation {
  ClientPopulation population;
  std::shared_ptr<const LabeledDataset> data;
  PartitionResult partition;
};

/// Synthetic clusters split across clients with the Dirichlet splitter.
LogisticPopulation make_logistic_dirichlet(const LogisticDirichletSpec& spec);

}  // namespace fedtheory
