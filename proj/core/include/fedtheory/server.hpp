#pragma once

#include "fedtheory/local_solver.hpp"
#include "fedtheory/objectives.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fedtheory {

enum class ParticipationMode { all, uniform_fraction };

enum class WeightRule {
  uniform,                  // 1/|S_t|
  proportional_to_samples,  // n_i / sum n_j over S_t
  custom,                   // population weights, renormalized over S_t
};

struct ParticipationPolicy {
  ParticipationMode mode = ParticipationMode::all;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  WeightRule weight_rule = WeightRule::custom;
};

struct RoundSample {
  std::vector<std::size_t> clients;  // ascending
  std::vector<double> weights;       // rho^t, aligned with clients
};

/// Draws S_t and renormalized rho^t. Deterministic in (policy.seed, t).
RoundSample sample_round(const ClientPopulation& pop, const ParticipationPolicy& policy,
                         std::size_t t);

struct PseudoGradient {
  ModelVector value;       // G = sum rho_i (x_t - x_{i,K})
  ModelVector correction;  // H = sum rho_i eta_l^i K_i h_i
  std::vector<std::size_t> clients;
  std::vector<double> weights;
};

/// x_{i,K} here is the gradient part of the local run (x_end minus the
/// correction displacement), so the corrected update is x_t - eta (G - H).
PseudoGradient aggregate(std::span<const LocalRunResult> results,
                         std::span<const double> weights, const ModelVector& x_t,
                         std::vector<std::size_t> clients = {});

enum class AdaptiveMode { none, elementwise, scalar };

struct ServerHyper {
  double global_lr = 1.0;
  double nu = 0.0;
  double beta = 0.0;
  double beta2 = 0.999;
  AdaptiveMode adaptive = AdaptiveMode::none;
  double phi_floor = 1e-12;
};

struct ServerState {
  ModelVector x;
  std::size_t round = 0;
  ModelVector d_prev;  // momentum d^{t-1}
  ModelVector v_prev;  // adaptive accumulator v_{t-1}

  static ServerState initial(ModelVector x0);
};

/// x_{t+1} = x_t - G.
ServerState step_fedavg(const ServerState& state, const PseudoGradient& g);

/// x_{t+1} = x_t - eta (G - H).
ServerState step_dc(const ServerState& state, const PseudoGradient& g, double eta);

struct SAStepInfo {
  double eta_phi = 0.0;  // eta / phi in scalar mode, eta otherwise
  double phi = 1.0;      // scalar phi (1 unless scalar mode)
  ModelVector d_prev;
  ModelVector d;
};

/// Quasi-hyperbolic momentum step with optional adaptive scaling:
///   d^t = (1 - beta) G + beta d^{t-1}
///   v_t = beta2 G^2 + (1 - beta2) v_{t-1}
///   x_{t+1} = x_t - eta / phi * [(1 - nu) G + nu d^t],  phi = sqrt(v_t)
/// In scalar mode phi = sqrt(mean(v_t)).
ServerState step_sa(const ServerState& state, const PseudoGradient& g, const ServerHyper& hyper,
                    SAStepInfo* info = nullptr);

}  // namespace fedtheory
