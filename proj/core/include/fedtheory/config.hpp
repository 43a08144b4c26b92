#pragma once

#include "fedtheory/local_solver.hpp"
#include "fedtheory/objectives.hpp"
#include "fedtheory/server.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fedtheory {

enum class Algorithm { la_fedavg, dc, sa };
enum class CorrectionSource { none, scaffold, oracle };

Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm algorithm);

/// Linear decay of the local rate to zero over the last `fraction` of rounds:
/// with N = ceil(fraction T), round t >= T - N uses eta_l (T - t) / (N + 1).
struct LrDecay {
  double fraction = 0.1;
};

double lr_decay_factor(const std::optional<LrDecay>& decay, std::size_t t, std::size_t rounds);

struct SolverSpec {
  LocalSolverConfig base;
  std::vector<std::size_t> steps_per_client;  // overrides base.steps when nonempty
  std::vector<double> lr_per_client;          // overrides base.local_lr when nonempty
  std::optional<LrDecay> lr_decay;
  std::uint64_t noise_seed = 0;
  bool noise_seed_pinned = false;  // set explicitly in the config file
};

struct ServerSpec {
  Algorithm algorithm = Algorithm::la_fedavg;
  ServerHyper hyper;
  CorrectionSource correction = CorrectionSource::none;
  double oracle_gamma = 0.1;
};

struct DiagnosticsSpec {
  bool dump_A = false;
  double tolerance = 1e-9;
};

struct OutputSpec {
  std::string directory;  // empty: no files
  std::string log_name = "trajectory.jsonl";
  std::string summary_name = "summary.json";
  std::string trajectory_csv;  // optional projected trajectory export
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t rounds = 100;
  std::optional<ModelVector> x0;  // zeros when absent
  std::string population_json;    // raw population section
  std::filesystem::path base_dir = ".";
  SolverSpec solver;
  ServerSpec server;
  ParticipationPolicy participation;
  DiagnosticsSpec diagnostics;
  OutputSpec output;
  unsigned threads = 1;
  bool participation_seed_pinned = false;
};

/// Parses and validates a JSON experiment config. Errors name the field.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

ClientPopulation build_population(const ExperimentConfig& cfg);

/// Replaces the master seed and every seed derived from it that the config
/// file did not pin explicitly.
void reseed(ExperimentConfig& cfg, std::uint64_t seed);

/// Sets a generator parameter in the population section (e.g. "alpha").
void set_population_param(ExperimentConfig& cfg, const std::string& key, double value);

/// Sweepable knobs: alpha, participation, K, eta_l, nu, beta.
void apply_sweep_value(ExperimentConfig& cfg, const std::string& parameter, double value);

}  // namespace fedtheory
