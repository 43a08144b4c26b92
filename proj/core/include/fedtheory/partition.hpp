#pragma once

#include "fedtheory/objectives.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fedtheory {

struct PartitionSpec {
  std::size_t num_clients = 1;
  double alpha = 1.0;
  std::size_t min_threshold = 0;
  std::uint64_t seed = 0;
};

struct PartitionResult {
  std::vector<std::vector<std::size_t>> assignments;      // D_1..D_C
  std::vector<std::vector<std::size_t>> class_counts;     // C x num_classes
  std::size_t num_classes = 0;
};

/// Dirichlet label-skew split. Per class, p^c ~ Dir(alpha) is drawn once;
/// each pass over the remaining indices hands client i (in a shuffled order)
/// the next ceil(p^c_i n_c) indices of class c. Clients below min_threshold
/// then take random indices from the largest client, one at a time.
PartitionResult split(std::span<const int> labels, const PartitionSpec& spec);

struct PartitionStats {
  std::vector<std::size_t> sizes;
  std::vector<double> entropy;       // label entropy per client (nats); 0 for empty clients
  double mean_entropy = 0.0;         // over nonempty clients
  double mean_pairwise_tv = 0.0;     // total-variation distance of label histograms
  std::size_t total = 0;
};

PartitionStats partition_stats(const PartitionResult& result);

/// Gaussian class clusters: centroid_c = separation * u_c with u_c a random
/// unit vector, samples N(centroid_c, I). Rows are ordered by class.
LabeledDataset make_synthetic_dataset(int num_classes, std::size_t samples_per_class,
                                      Eigen::Index feature_dim, double class_separation,
                                      std::uint64_t seed);

}  // namespace fedtheory
