#include "fedtheory/config.hpp"
#include "fedtheory/errors.hpp"
#include "fedtheory/experiment.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fedtheory;

namespace {

std::string run_log(const ExperimentConfig& cfg) {
  std::ostringstream out;
  ExperimentSink sink;
  sink.log = &out;
  run_experiment(cfg, build_population(cfg), sink);
  return out.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("zero rounds logs only the initial state") {
  const auto cfg = parse_config(R"({"rounds": 0, "population": {"generator": "paraboloid", "clients": 4}})");
  const auto log = run_experiment(cfg, build_population(cfg));
  CHECK(log.rounds.empty());
  CHECK(line_count(run_log(cfg)) == 1);
}

TEST_CASE("one client, one round") {
  const auto cfg = parse_config(R"({"rounds": 1, "x0": [3, -1],
      "population": {"clients": [{"type": "quadratic", "center": [1, 2]}]}})");
  const auto pop = build_population(cfg);
  const auto s = summarize(run_experiment(cfg, pop), pop);
  CHECK(s.rounds == 1);
  CHECK(s.identity_rounds == 1);
  CHECK(s.max_residual <= 1e-9);
}

TEST_CASE("every algorithm keeps its identity on quadratics") {
  const char* configs[] = {
      R"({"rounds": 30, "x0": [5, 5], "population": {"generator": "paraboloid", "clients": 8},
          "participation": {"mode": "uniform_fraction", "fraction": 0.5}})",
      R"({"rounds": 30, "x0": [5, 5], "population": {"generator": "paraboloid", "clients": 8},
          "server": {"algorithm": "dc", "global_lr": 0.8, "correction": "scaffold"}})",
      R"({"rounds": 30, "x0": [5, 5], "population": {"generator": "paraboloid", "clients": 8},
          "server": {"algorithm": "dc", "global_lr": 1.0, "correction": "oracle", "oracle_gamma": 0.2}})",
      R"({"rounds": 30, "x0": [5, 5], "population": {"generator": "paraboloid", "clients": 8},
          "server": {"algorithm": "sa", "global_lr": 0.5, "nu": 0.7, "beta": 0.9, "adaptive": "scalar"}})",
      R"({"rounds": 30, "x0": [5, 5], "population": {"generator": "paraboloid", "clients": 8},
          "server": {"algorithm": "sa", "global_lr": 0.5, "nu": 0.7, "beta": 0.9}})",
  };
  for (const char* text : configs) {
    const auto cfg = parse_config(text);
    const auto pop = build_population(cfg);
    const auto s = summarize(run_experiment(cfg, pop), pop);
    CHECK(s.identity_rounds == 30);
    CHECK(s.identity_failures == 0);
  }
}

TEST_CASE("elementwise adaptive rounds are logged as approximate") {
  const auto cfg = parse_config(R"({"rounds": 5, "x0": [5, 5], "population": {"generator": "paraboloid", "clients": 4},
      "server": {"algorithm": "sa", "nu": 0.5, "beta": 0.5, "adaptive": "elementwise"}})");
  const auto log = run_experiment(cfg, build_population(cfg));
  for (const auto& r : log.rounds) {
    CHECK(r.identity == IdentityKind::approximate);
    CHECK_FALSE(r.residual.has_value());
  }
}

TEST_CASE("identical config and seed give byte-identical logs, regardless of threads") {
  auto cfg = load_config(std::filesystem::path(FEDTHEORY_CONFIG_DIR) / "paraboloid.json");
  cfg.rounds = 40;
  const auto a = run_log(cfg);
  const auto b = run_log(cfg);
  cfg.threads = 3;
  const auto c = run_log(cfg);
  CHECK(a == b);
  CHECK(a == c);
  reseed(cfg, cfg.seed + 1);
  CHECK(run_log(cfg) != a);
}

TEST_CASE("paraboloid config enters the region") {
  const auto cfg = load_config(std::filesystem::path(FEDTHEORY_CONFIG_DIR) / "paraboloid.json");
  const auto pop = build_population(cfg);
  const auto s = summarize(run_experiment(cfg, pop), pop);
  CHECK(s.region_entry_round.has_value());
  CHECK(s.identity_failures == 0);
}

TEST_CASE("divergence aborts with a flushed log") {
  const auto cfg = parse_config(R"({"rounds": 10, "x0": [5, 5], "solver": {"steps": 40, "local_lr": 1.6},
      "population": {"generator": "paraboloid", "clients": 3}})");
  std::ostringstream out;
  ExperimentSink sink;
  sink.log = &out;
  CHECK_THROWS_AS(run_experiment(cfg, build_population(cfg), sink), DivergenceError);
  CHECK(out.str().find("\"type\":\"abort\"") != std::string::npos);
}

TEST_CASE("run to directory writes the log, summary and matrices") {
  auto cfg = parse_config(R"({"rounds": 3, "x0": [2, 2], "population": {"generator": "paraboloid", "clients": 4},
      "diagnostics": {"dump_A": true}, "output": {"trajectory_csv": "traj.csv"}})");
  const auto dir = std::filesystem::temp_directory_path() / "fedtheory_run_to_directory";
  std::filesystem::remove_all(dir);
  run_to_directory(cfg, build_population(cfg), dir);
  CHECK(std::filesystem::exists(dir / "trajectory.jsonl"));
  CHECK(std::filesystem::exists(dir / "summary.json"));
  CHECK(std::filesystem::exists(dir / "traj.csv"));
  CHECK(std::filesystem::exists(dir / "A" / "A_0.csv"));
  std::filesystem::remove_all(dir);
}
