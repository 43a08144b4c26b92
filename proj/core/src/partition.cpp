#include "fedtheory/partition.hpp"

#include "fedtheory/errors.hpp"
#include "fedtheory/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedtheory {

PartitionResult split(std::span<const int> labels, const PartitionSpec& spec) {
  if (labels.empty()) throw InputError("split: no labels");
  if (spec.num_clients == 0) throw InputError("split: need at least one client");
  if (!(spec.alpha > 0.0)) throw InputError("split: alpha must be positive");
  if (spec.min_threshold * spec.num_clients > labels.size())
    throw InputError("split: min_threshold * clients exceeds the sample count");

  int max_label = 0;
  for (int y : labels) {
    if (y < 0) throw InputError("split: negative label");
    max_label = std::max(max_label, y);
  }
  const auto num_classes = static_cast<std::size_t>(max_label) + 1;
  const auto clients = spec.num_clients;

  std::vector<std::vector<std::size_t>> pools(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i)
    pools[static_cast<std::size_t>(labels[i])].push_back(i);

  Rng rng(mix_seed(spec.seed));
  std::vector<std::vector<double>> shares(num_classes);
  for (auto& p : shares) p = dirichlet(rng, spec.alpha, clients);

  PartitionResult out;
  out.num_classes = num_classes;
  out.assignments.resize(clients);
  std::vector<std::size_t> cursor(num_classes, 0);
  std::vector<std::size_t> order(clients);
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto remaining = [&](std::size_t c) { return pools[c].size() - cursor[c]; };
  const auto any_left = [&] {
    for (std::size_t c = 0; c < num_classes; ++c)
      if (remaining(c) > 0) return true;
    return false;
  };
  while (any_left()) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t c = 0; c < num_classes; ++c) {
      const double n_c = static_cast<double>(remaining(c));
      if (n_c == 0.0) continue;
      std::vector<std::size_t> quota(clients);
      for (std::size_t i = 0; i < clients; ++i)
        quota[i] = static_cast<std::size_t>(std::ceil(shares[c][i] * n_c));
      for (auto i : order) {
        const auto take = std::min(quota[i], remaining(c));
        auto& dst = out.assignments[i];
        dst.insert(dst.end(), pools[c].begin() + static_cast<std::ptrdiff_t>(cursor[c]),
                   pools[c].begin() + static_cast<std::ptrdiff_t>(cursor[c] + take));
        cursor[c] += take;
      }
    }
  }

  for (std::size_t i = 0; i < clients; ++i) {
    while (out.assignments[i].size() < spec.min_threshold) {
      const auto largest = static_cast<std::size_t>(std::distance(
          out.assignments.begin(),
          std::max_element(out.assignments.begin(), out.assignments.end(),
                           [](const auto& a, const auto& b) { return a.size() < b.size(); })));
      auto& src = out.assignments[largest];
      std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
      const auto at = pick(rng);
      out.assignments[i].push_back(src[at]);
      src.erase(src.begin() + static_cast<std::ptrdiff_t>(at));
    }
  }

  out.class_counts.assign(clients, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < clients; ++i)
    for (auto idx : out.assignments[i]) ++out.class_counts[i][static_cast<std::size_t>(labels[idx])];
  return out;
}

PartitionStats partition_stats(const PartitionResult& result) {
  PartitionStats s;
  const auto clients = result.assignments.size();
  s.sizes.resize(clients);
  s.entropy.assign(clients, 0.0);
  std::vector<std::vector<double>> hist(clients);
  std::size_t nonempty = 0;
  for (std::size_t i = 0; i < clients; ++i) {
    s.sizes[i] = result.assignments[i].size();
    s.total += s.sizes[i];
    const auto& counts = result.class_counts[i];
    hist[i].assign(counts.size(), 0.0);
    if (s.sizes[i] == 0) continue;
    ++nonempty;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      const double p = static_cast<double>(counts[c]) / static_cast<double>(s.sizes[i]);
      hist[i][c] = p;
      if (p > 0.0) s.entropy[i] -= p * std::log(p);
    }
    s.mean_entropy += s.entropy[i];
  }
  if (nonempty > 0) s.mean_entropy /= static_cast<double>(nonempty);

  double tv = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < clients; ++i) {
    if (s.sizes[i] == 0) continue;
    for (std::size_t j = i + 1; j < clients; ++j) {
      if (s.sizes[j] == 0) continue;
      double d = 0.0;
      for (std::size_t c = 0; c < hist[i].size(); ++c) d += std::abs(hist[i][c] - hist[j][c]);
      tv += 0.5 * d;
      ++pairs;
    }
  }
  if (pairs > 0) s.mean_pairwise_tv = tv / static_cast<double>(pairs);
  return s;
}

LabeledDataset make_synthetic_dataset(int num_classes, std::size_t samples_per_class,
                                      Eigen::Index feature_dim, double class_separation,
                                      std::uint64_t seed) {
  if (num_classes < 2 || samples_per_class == 0 || feature_dim <= 0)
    throw InputError("make_synthetic_dataset: sizes must be positive (>= 2 classes)");
  if (!(class_separation >= 0.0)) throw InputError("make_synthetic_dataset: negative separation");

  Rng rng(mix_seed(seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix centroids(num_classes, feature_dim);
  for (int c = 0; c < num_classes; ++c) {
    ModelVector u(feature_dim);
    for (Eigen::Index k = 0; k < feature_dim; ++k) u(k) = gauss(rng);
    centroids.row(c) = class_separation * u.normalized().transpose();
  }

  LabeledDataset data;
  data.num_classes = num_classes;
  const auto rows = static_cast<Eigen::Index>(samples_per_class) * num_classes;
  data.features.resize(rows, feature_dim);
  data.labels.resize(static_cast<std::size_t>(rows));
  Eigen::Index r = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t s = 0; s < samples_per_class; ++s, ++r) {
      for (Eigen::Index k = 0; k < feature_dim; ++k)
        data.features(r, k) = centroids(c, k) + gauss(rng);
      data.labels[static_cast<std::size_t>(r)] = c;
    }
  }
  return data;
}

}  // namespace fedtheory
