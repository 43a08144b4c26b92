#include "fedtheory/server.hpp"

#include "fedtheory/errors.hpp"
#include "fedtheory/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedtheory {

RoundSample sample_round(const ClientPopulation& pop, const ParticipationPolicy& policy,
                         std::size_t t) {
  const auto n = pop.size();
  if (n == 0) throw InputError("sample_round: empty population");

  RoundSample out;
  if (policy.mode == ParticipationMode::all) {
    out.clients.resize(n);
    std::iota(out.clients.begin(), out.clients.end(), std::size_t{0});
  } else {
    if (!(policy.fraction > 0.0 && policy.fraction <= 1.0))
      throw ConfigError("participation.fraction", "must be in (0, 1]");
    const auto m = static_cast<std::size_t>(std::llround(policy.fraction * static_cast<double>(n)));
    if (m == 0)
      throw ConfigError("participation.fraction",
                        "selects zero of " + std::to_string(n) + " clients");
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    Rng rng(derive_seed(policy.seed, t, 0x5eed));
    out.clients.reserve(m);
    std::sample(all.begin(), all.end(), std::back_inserter(out.clients), m, rng);
  }

  out.weights.reserve(out.clients.size());
  for (auto i : out.clients) {
    switch (policy.weight_rule) {
      case WeightRule::uniform: out.weights.push_back(1.0); break;
      case WeightRule::proportional_to_samples: {
        const auto count = pop.clients[i]->sample_count();
        if (count == 0)
          throw ConfigError("participation.weight_rule",
                            "proportional_to_samples needs sample-backed clients");
        out.weights.push_back(static_cast<double>(count));
        break;
      }
      case WeightRule::custom: out.weights.push_back(pop.weights[i]); break;
    }
  }
  const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  if (!(total > 0.0)) throw ConfigError("participation", "sampled clients carry zero weight");
  if (policy.mode != ParticipationMode::all || policy.weight_rule != WeightRule::custom) {
    for (auto& w : out.weights) w /= total;
  }
  return out;
}

PseudoGradient aggregate(std::span<const LocalRunResult> results,
                         std::span<const double> weights, const ModelVector& x_t,
                         std::vector<std::size_t> clients) {
  if (results.size() != weights.size())
    throw InputError("aggregate: weight/result length mismatch");
  if (results.empty()) throw InputError("aggregate: no results");
  if (!clients.empty() && clients.size() != results.size())
    throw InputError("aggregate: client list length mismatch");

  PseudoGradient g;
  g.value = ModelVector::Zero(x_t.size());
  g.correction = ModelVector::Zero(x_t.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.x_end.size() != x_t.size()) throw InputError("aggregate: dimension mismatch");
    g.value += weights[i] * (x_t - (r.x_end - r.applied_correction));
    g.correction += weights[i] * r.applied_correction;
  }
  g.weights.assign(weights.begin(), weights.end());
  if (clients.empty()) {
    clients.resize(results.size());
    std::iota(clients.begin(), clients.end(), std::size_t{0});
  }
  g.clients = std::move(clients);
  return g;
}

ServerState ServerState::initial(ModelVector x0) {
  ServerState s;
  s.d_prev = ModelVector::Zero(x0.size());
  s.v_prev = ModelVector::Zero(x0.size());
  s.x = std::move(x0);
  return s;
}

ServerState step_fedavg(const ServerState& state, const PseudoGradient& g) {
  ServerState next = state;
  next.x = state.x - g.value;
  next.round = state.round + 1;
  return next;
}

ServerState step_dc(const ServerState& state, const PseudoGradient& g, double eta) {
  ServerState next = state;
  next.x = state.x - eta * (g.value - g.correction);
  next.round = state.round + 1;
  return next;
}

ServerState step_sa(const ServerState& state, const PseudoGradient& g, const ServerHyper& hyper,
                    SAStepInfo* info) {
  if (hyper.nu < 0.0 || hyper.nu > 1.0 || hyper.beta < 0.0 || hyper.beta > 1.0)
    throw InputError("step_sa: nu and beta must lie in [0, 1]");
  ServerState next = state;
  next.d_prev = (1.0 - hyper.beta) * g.value + hyper.beta * state.d_prev;
  next.v_prev = hyper.beta2 * g.value.cwiseAbs2() + (1.0 - hyper.beta2) * state.v_prev;

  const ModelVector direction = (1.0 - hyper.nu) * g.value + hyper.nu * next.d_prev;
  double phi = 1.0;
  double eta_phi = hyper.global_lr;
  switch (hyper.adaptive) {
    case AdaptiveMode::none:
      next.x = state.x - hyper.global_lr * direction;
      break;
    case AdaptiveMode::scalar:
      phi = std::max(std::sqrt(next.v_prev.mean()), hyper.phi_floor);
      eta_phi = hyper.global_lr / phi;
      next.x = state.x - eta_phi * direction;
      break;
    case AdaptiveMode::elementwise: {
      const ModelVector phis = next.v_prev.cwiseSqrt().cwiseMax(hyper.phi_floor);
      next.x = state.x - hyper.global_lr * direction.cwiseQuotient(phis);
      break;
    }
  }
  next.round = state.round + 1;
  if (info != nullptr) {
    info->eta_phi = eta_phi;
    info->phi = phi;
    info->d_prev = state.d_prev;
    info->d = next.d_prev;
  }
  return next;
}

}  // namespace fedtheory
