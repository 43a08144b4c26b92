#include "fedtheory/local_solver.hpp"

#include "fedtheory/errors.hpp"
#include "fedtheory/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedtheory {

namespace {

constexpr double kDivergenceLimit = 1e6;

class DivergenceGuard {
 public:
  DivergenceGuard(const ModelVector& optimum, double start_norm)
      : optimum_(optimum), scale_(std::max(start_norm, 1.0)) {}

  void check(const ModelVector& x, std::size_t iteration) const {
    const double ratio = (x - optimum_).norm() / scale_;
    if (!std::isfinite(ratio) || ratio > kDivergenceLimit)
      throw DivergenceError(iteration, ratio);
  }

 private:
  const ModelVector& optimum_;
  double scale_;
};

class BatchSampler {
 public:
  BatchSampler(std::size_t population, std::size_t batch, std::uint64_t seed)
      : order_(population), batch_(batch), rng_(mix_seed(seed)) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  bool full() const { return batch_ == order_.size(); }

  std::span<const std::size_t> next() {
    if (full()) return order_;
    for (std::size_t i = 0; i < batch_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order_.size() - 1);
      std::swap(order_[i], order_[pick(rng_)]);
    }
    return std::span<const std::size_t>(order_.data(), batch_);
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  Rng rng_;
};

}  // namespace

LocalMethod parse_local_method(const std::string& name) {
  if (name == "exact_solve") return LocalMethod::exact_solve;
  if (name == "gd") return LocalMethod::gd;
  if (name == "sgd") return LocalMethod::sgd;
  if (name == "nesterov") return LocalMethod::nesterov;
  throw InputError("unknown local method '" + name + "'");
}

std::string to_string(LocalMethod method) {
  switch (method) {
    case LocalMethod::exact_solve: return "exact_solve";
    case LocalMethod::gd: return "gd";
    case LocalMethod::sgd: return "sgd";
    case LocalMethod::nesterov: return "nesterov";
  }
  return "unknown";
}

LocalRunResult run_local(const Objective& obj, const ModelVector& x_start,
                         const LocalSolverConfig& cfg,
                         const std::optional<ModelVector>& correction) {
  if (x_start.size() != obj.dim()) throw InputError("run_local: dimension mismatch");
  if (cfg.steps == 0) throw InputError("run_local: steps must be positive");
  if (!(cfg.local_lr > 0.0)) throw InputError("run_local: local_lr must be positive");
  if (correction && correction->size() != x_start.size())
    throw InputError("run_local: correction dimension mismatch");

  const ModelVector& optimum = obj.optimum();
  const auto d = x_start.size();
  const double eta = cfg.local_lr;
  const auto k_steps = static_cast<double>(cfg.steps);

  LocalRunResult out;
  out.delta_start = x_start - optimum;
  out.applied_correction =
      correction ? ModelVector(eta * k_steps * *correction) : ModelVector(ModelVector::Zero(d));
  out.noise_aggregate = ModelVector::Zero(d);

  const DivergenceGuard guard(optimum, out.delta_start.norm());
  const auto add_correction = [&](ModelVector& x) {
    if (correction) x += eta * *correction;
  };

  ModelVector x = x_start;
  switch (cfg.method) {
    case LocalMethod::exact_solve:
      x = optimum + out.applied_correction;
      break;
    case LocalMethod::gd:
      for (std::size_t k = 0; k < cfg.steps; ++k) {
        x -= eta * obj.gradient(x);
        add_correction(x);
        guard.check(x, k + 1);
      }
      break;
    case LocalMethod::sgd: {
      const auto n = obj.sample_count();
      if (n == 0) throw UnsupportedObjective("sgd needs an objective backed by samples");
      const auto batch = cfg.batch_size.value_or(n);
      if (batch == 0 || batch > n)
        throw InputError("run_local: batch_size must be in [1, sample count]");
      BatchSampler sampler(n, batch, cfg.noise_seed);
      for (std::size_t k = 0; k < cfg.steps; ++k) {
        const ModelVector g = obj.batch_gradient(x, sampler.next());
        if (!sampler.full()) out.noise_aggregate -= eta * (g - obj.gradient(x));
        x -= eta * g;
        add_correction(x);
        guard.check(x, k + 1);
      }
      break;
    }
    case LocalMethod::nesterov: {
      ModelVector prev = x;
      for (std::size_t k = 0; k < cfg.steps; ++k) {
        const double mu = static_cast<double>(k) / static_cast<double>(k + 3);
        const ModelVector y = x + mu * (x - prev);
        prev = x;
        x = y - eta * obj.gradient(y);
        add_correction(x);
        guard.check(x, k + 1);
      }
      break;
    }
  }

  out.x_end = x;
  out.delta_end = (x - out.applied_correction) - optimum;
  if (cfg.method == LocalMethod::exact_solve) out.delta_end.setZero();
  const double start_norm = out.delta_start.norm();
  out.sigma = start_norm > 0.0 ? out.delta_end.norm() / start_norm : 0.0;
  out.sigma_exceeds_one = out.sigma > 1.0;
  return out;
}

std::vector<SigmaSample> sigma_order_check(const Objective& obj, const ModelVector& x_start,
                                           LocalSolverConfig cfg,
                                           const std::vector<std::size_t>& k_values) {
  std::vector<SigmaSample> table;
  table.reserve(k_values.size());
  for (auto k : k_values) {
    cfg.steps = k;
    table.push_back({k, run_local(obj, x_start, cfg).sigma});
  }
  return table;
}

}  // namespace fedtheory
