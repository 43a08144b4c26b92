#include "fedtheory_cli/cli.hpp"

#include "fedtheory/config.hpp"
#include "fedtheory/errors.hpp"
#include "fedtheory/experiment.hpp"
#include "fedtheory/partition.hpp"
#include "fedtheory/projection.hpp"
#include "fedtheory/random.hpp"
#include "fedtheory/verification.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace fedtheory::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 0;
  bool quiet = false;
};

ExperimentConfig load_with_overrides(const std::string& path, const GlobalFlags& g,
                                     std::optional<std::size_t> rounds, bool dump_a) {
  auto cfg = load_config(path);
  if (g.seed) reseed(cfg, *g.seed);
  if (g.threads > 0) cfg.threads = g.threads;
  if (rounds) cfg.rounds = *rounds;
  if (dump_a) cfg.diagnostics.dump_A = true;
  return cfg;
}

fs::path output_dir(const GlobalFlags& g, const ExperimentConfig& cfg, const std::string& fallback) {
  if (!g.out.empty()) return g.out;
  if (!cfg.output.directory.empty()) return cfg.base_dir / cfg.output.directory;
  return fallback;
}

int cmd_run(const GlobalFlags& g, const std::string& config, std::optional<std::size_t> rounds,
            bool dump_a, std::ostream& out) {
  const auto cfg = load_with_overrides(config, g, rounds, dump_a);
  const auto pop = build_population(cfg);
  const auto dir = output_dir(g, cfg, "run_out");
  const auto summary = run_to_directory(cfg, pop, dir);
  if (!g.quiet) {
    out << summary_to_json(summary) << '\n';
    out << "log written to " << (dir / cfg.output.log_name).string() << '\n';
  }
  return summary.identity_failures == 0 ? kOk : kVerificationFailure;
}

int cmd_verify(const GlobalFlags& g, const std::string& suite, std::size_t trials, std::ostream& out) {
  SuiteOptions opts;
  opts.seed = g.seed.value_or(0);
  opts.trials = trials;
  const auto results = run_suite(suite, opts);
  bool all_ok = true;
  out << std::left << std::setw(12) << "suite" << std::setw(10) << "trials" << std::setw(10)
      << "failures" << std::setw(16) << "max_residual" << "status\n";
  for (const auto& r : results) {
    all_ok = all_ok && r.passed;
    out << std::left << std::setw(12) << r.name << std::setw(10) << r.trials << std::setw(10)
        << r.failures << std::setw(16) << std::setprecision(4) << r.max_residual
        << (r.passed ? "pass" : "FAIL") << '\n';
    if (!g.quiet)
      for (const auto& [k, v] : r.details) out << "    " << k << ": " << v << '\n';
  }
  return all_ok ? kOk : kVerificationFailure;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("sweep.values", "'" + item + "' is not a number");
    }
  }
  if (values.empty()) throw ConfigError("sweep.values", "empty value list");
  return values;
}

int cmd_sweep(const GlobalFlags& g, const std::string& config, const std::string& parameter,
              const std::string& values_text, std::size_t seeds, std::optional<std::size_t> rounds,
              std::ostream& out) {
  const auto values = parse_values(values_text);
  if (seeds == 0) throw ConfigError("sweep.seeds", "must be positive");
  const auto base = load_with_overrides(config, g, rounds, false);

  std::ostringstream rows;
  rows << std::setprecision(17);
  rows << "value,seed,heterogeneity,final_objective,final_distance,dwell_fraction,mean_sigma,"
          "center_offset_variance,max_identity_residual\n";
  std::map<double, std::vector<ExperimentSummary>> by_value;
  bool identities_ok = true;
  for (double v : values) {
    for (std::size_t s = 0; s < seeds; ++s) {
      auto cfg = base;
      apply_sweep_value(cfg, parameter, v);
      reseed(cfg, base.seed + s);
      const auto pop = build_population(cfg);
      const auto log = run_experiment(cfg, pop);
      const auto sum = summarize(log, pop, cfg.diagnostics.tolerance);
      identities_ok = identities_ok && sum.identity_failures == 0;
      rows << v << ',' << cfg.seed << ',' << sum.heterogeneity << ',' << sum.final_objective << ','
           << sum.final_distance << ',' << sum.dwell_fraction << ',' << sum.mean_sigma << ','
           << sum.center_offset_variance << ',' << sum.max_residual << '\n';
      by_value[v].push_back(sum);
    }
  }

  std::ostringstream means;
  means << std::setprecision(17);
  means << "value,runs,heterogeneity,final_objective,final_distance,dwell_fraction,mean_sigma,"
           "center_offset_variance\n";
  for (double v : values) {
    const auto& runs = by_value[v];
    double h = 0, f = 0, dist = 0, dwell = 0, sigma = 0, var = 0;
    for (const auto& r : runs) {
      h += r.heterogeneity;
      f += r.final_objective;
      dist += r.final_distance;
      dwell += r.dwell_fraction;
      sigma += r.mean_sigma;
      var += r.center_offset_variance;
    }
    const double k = static_cast<double>(runs.size());
    means << v << ',' << runs.size() << ',' << h / k << ',' << f / k << ',' << dist / k << ','
          << dwell / k << ',' << sigma / k << ',' << var / k << '\n';
  }

  if (!g.out.empty()) {
    fs::create_directories(g.out);
    std::ofstream(fs::path(g.out) / "sweep.csv") << rows.str();
    std::ofstream(fs::path(g.out) / "sweep_means.csv") << means.str();
    if (!g.quiet) out << "wrote " << (fs::path(g.out) / "sweep.csv").string() << '\n';
  } else {
    out << rows.str();
  }
  if (!g.quiet) out << means.str();
  return identities_ok ? kOk : kVerificationFailure;
}

std::vector<int> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("labels", "cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("labels", e.what());
  }
  try {
    if (j.is_object()) return j.at("labels").get<std::vector<int>>();
    return j.get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("labels", std::string("expected an int array or {\"labels\": [...]}: ") + e.what());
  }
}

int cmd_partition(const GlobalFlags& g, const std::string& labels_path, std::size_t clients,
                  double alpha, std::size_t min_threshold, std::ostream& out) {
  const auto labels = read_labels(labels_path);
  PartitionSpec spec;
  spec.num_clients = clients;
  spec.alpha = alpha;
  spec.min_threshold = min_threshold;
  spec.seed = g.seed.value_or(0);
  PartitionResult result;
  try {
    result = split(labels, spec);
  } catch (const InputError& e) {
    throw ConfigError("partition", e.what());
  }
  const auto stats = partition_stats(result);

  Json j;
  j["alpha"] = alpha;
  j["seed"] = spec.seed;
  j["clients"] = result.assignments;
  const fs::path dir = g.out.empty() ? fs::path("partition_out") : fs::path(g.out);
  fs::create_directories(dir);
  std::ofstream(dir / "partition.json") << j.dump() << '\n';
  std::ofstream csv(dir / "class_counts.csv");
  csv << "client";
  for (std::size_t c = 0; c < result.num_classes; ++c) csv << ",class_" << c;
  csv << '\n';
  for (std::size_t i = 0; i < result.class_counts.size(); ++i) {
    csv << i;
    for (auto v : result.class_counts[i]) csv << ',' << v;
    csv << '\n';
  }
  if (!g.quiet) {
    out << "clients " << clients << ", samples " << stats.total << ", mean label entropy "
        << stats.mean_entropy << ", mean pairwise TV " << stats.mean_pairwise_tv << '\n';
    out << "wrote " << (dir / "partition.json").string() << '\n';
  }
  return kOk;
}

int cmd_landscape(const GlobalFlags& g, const std::string& config, std::size_t resolution,
                  double margin, bool trajectory, std::ostream& out) {
  auto cfg = load_with_overrides(config, g, std::nullopt, false);
  const auto pop = build_population(cfg);
  const auto basis = make_basis(pop.dim(), derive_seed(cfg.seed, 17));
  const auto optima = pop.optima();

  std::vector<PlanePoint> projected;
  for (const auto& o : optima) projected.push_back(relative_position(o, basis));
  GridSpec grid;
  grid.nx = grid.ny = resolution;
  const auto [xmin, xmax] = std::minmax_element(projected.begin(), projected.end(),
                                                [](auto a, auto b) { return a.x < b.x; });
  const auto [ymin, ymax] = std::minmax_element(projected.begin(), projected.end(),
                                                [](auto a, auto b) { return a.y < b.y; });
  const double span = std::max({xmax->x - xmin->x, ymax->y - ymin->y, 1e-3});
  grid.x_min = xmin->x - margin * span;
  grid.x_max = xmax->x + margin * span;
  grid.y_min = ymin->y - margin * span;
  grid.y_max = ymax->y + margin * span;

  const auto values = gathered_landscape(pop, basis, grid, ProjectionMode::normalized, cfg.threads);
  const auto dir = output_dir(g, cfg, "landscape_out");
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "landscape.csv");
    write_grid_csv(csv, values, grid);
  }
  {
    std::ofstream csv(dir / "optima.csv");
    csv << std::setprecision(17) << "client,x,y\n";
    for (std::size_t i = 0; i < projected.size(); ++i)
      csv << i << ',' << projected[i].x << ',' << projected[i].y << '\n';
  }
  if (trajectory) {
    cfg.output.trajectory_csv = "trajectory.csv";
    run_to_directory(cfg, pop, dir);
  }
  if (!g.quiet) out << "wrote " << (dir / "landscape.csv").string() << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated optimization simulator and single-round identity checker", "fedtheory"};
  app.require_subcommand(1);

  GlobalFlags g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Master seed")->group("Global");
  app.add_option("--out", g.out, "Output directory")->group("Global");
  app.add_option("--threads", g.threads, "Worker threads for per-client runs")->group("Global");
  app.add_flag("--quiet", g.quiet, "Print only essential output")->group("Global");

  std::string config;
  std::optional<std::size_t> rounds;
  bool dump_a = false;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment from a config file");
  run_cmd->fallthrough();
  run_cmd->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--rounds", rounds, "Override the number of rounds");
  run_cmd->add_flag("--dump-A", dump_a, "Write the per-round A matrix as CSV");

  std::string suite;
  std::size_t trials = 0;
  auto* verify_cmd = app.add_subcommand("verify", "Run a randomized property suite");
  verify_cmd->fallthrough();
  verify_cmd->add_option("suite", suite, "theorem2|theorem3|theorem4|decoupling|bounds|lowerbound|all")
      ->required()
      ->check(CLI::IsMember({"theorem2", "theorem3", "theorem4", "decoupling", "bounds", "lowerbound", "all"}));
  verify_cmd->add_option("--trials", trials, "Trials per suite (0 = suite default)");

  std::string parameter, values;
  std::size_t seeds = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one experiment per parameter value");
  sweep_cmd->fallthrough();
  sweep_cmd->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--param", parameter, "alpha|participation|K|eta_l|nu|beta")->required();
  sweep_cmd->add_option("--values", values, "Comma separated values")->required();
  sweep_cmd->add_option("--seeds", seeds, "Seeds per value");
  sweep_cmd->add_option("--rounds", rounds, "Override the number of rounds");

  std::string labels;
  std::size_t clients = 1, min_threshold = 0;
  double alpha = 1.0;
  auto* partition_cmd = app.add_subcommand("partition", "Dirichlet label-skew split");
  partition_cmd->fallthrough();
  partition_cmd->add_option("--labels", labels, "JSON int array or {\"labels\": [...]}")
      ->required()
      ->check(CLI::ExistingFile);
  partition_cmd->add_option("--clients", clients, "Number of clients")->required();
  partition_cmd->add_option("--alpha", alpha, "Dirichlet concentration")->required();
  partition_cmd->add_option("--min-threshold", min_threshold, "Minimum samples per client");

  std::size_t resolution = 50;
  double margin = 0.25;
  bool trajectory = false;
  auto* landscape_cmd = app.add_subcommand("landscape", "Export the gathered loss landscape");
  landscape_cmd->fallthrough();
  landscape_cmd->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  landscape_cmd->add_option("--grid", resolution, "Grid cells per axis")->check(CLI::PositiveNumber);
  landscape_cmd->add_option("--margin", margin, "Padding around the projected optima, as a fraction of their span");
  landscape_cmd->add_flag("--trajectory", trajectory, "Also run the experiment and export its projected trajectory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    if (*run_cmd) return cmd_run(g, config, rounds, dump_a, out);
    if (*verify_cmd) return cmd_verify(g, suite, trials, out);
    if (*sweep_cmd) return cmd_sweep(g, config, parameter, values, seeds, rounds, out);
    if (*partition_cmd) return cmd_partition(g, labels, clients, alpha, min_threshold, out);
    if (*landscape_cmd) return cmd_landscape(g, config, resolution, margin, trajectory, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DivergenceError& e) {
    err << "run aborted: " << e.what() << '\n';
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kRuntimeFailure;
}

}  // namespace fedtheory::cli
