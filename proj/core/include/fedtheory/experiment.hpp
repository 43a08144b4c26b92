#pragma once

#include "fedtheory/config.hpp"
#include "fedtheory/theory.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fedtheory {

struct ClientLog {
  std::size_t client = 0;
  double weight = 0.0;
  double sigma = 0.0;
  double local_lr = 0.0;
  std::size_t steps = 0;
};

enum class IdentityKind { theorem2, theorem3, theorem4, approximate };
std::string to_string(IdentityKind kind);

struct RoundLog {
  std::size_t round = 0;
  ModelVector x;
  ModelVector x_next;
  std::vector<ClientLog> clients;
  RoundDiagnostics diagnostics;
  double g_norm = 0.0;
  double h_norm = 0.0;
  double distance_next = 0.0;  // ||x_{t+1} - mean(x*)||
  IdentityKind identity = IdentityKind::approximate;
  std::optional<double> residual;  // relative identity residual
  std::optional<DCDiagnostics> dc;
  std::optional<SADiagnostics> sa;
};

struct TrajectoryLog {
  ModelVector x0;
  ModelVector center;  // unweighted mean of all optima
  double radius = 0.0;
  double heterogeneity = 0.0;
  std::vector<RoundLog> rounds;
  std::string status = "ok";
};

struct ExperimentSink {
  std::ostream* log = nullptr;          // JSONL, flushed after every record
  std::filesystem::path matrix_dir;     // per-round A as CSV when nonempty
};

/// Runs `cfg.rounds` rounds of the configured algorithm, checking the exact
/// single-round identity on every round where one applies. Local runs fan
/// out over cfg.threads; results do not depend on the thread count. On a
/// solver divergence the records written so far stay in the sink, an abort
/// record is appended and the error is rethrown.
TrajectoryLog run_experiment(const ExperimentConfig& cfg, const ClientPopulation& pop,
                             const ExperimentSink& sink = {});

struct ExperimentSummary {
  std::size_t rounds = 0;
  std::string status = "ok";
  double final_distance = 0.0;
  double min_distance_after_entry = 0.0;
  std::optional<std::size_t> region_entry_round;
  double dwell_fraction = 0.0;
  double max_residual = 0.0;
  std::size_t identity_failures = 0;
  std::size_t identity_rounds = 0;
  double final_objective = 0.0;
  double heterogeneity = 0.0;
  double radius = 0.0;
  double mean_sigma = 0.0;
  double center_offset_variance = 0.0;  // variance over rounds of ||x*_S - mean(x*)||
};

ExperimentSummary summarize(const TrajectoryLog& log, const ClientPopulation& pop,
                            double tolerance = 1e-9);

std::string summary_to_json(const ExperimentSummary& summary);

/// Distances ||x_t - mean(x*)|| for t = 0..T.
std::vector<double> distance_series(const TrajectoryLog& log);

/// Writes trajectory log, summary and optional A matrices under `dir`.
ExperimentSummary run_to_directory(const ExperimentConfig& cfg, const ClientPopulation& pop,
                                   const std::filesystem::path& dir);

}  // namespace fedtheory
