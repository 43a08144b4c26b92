#include "fedtheory/config.hpp"

#include "fedtheory/random.hpp"
#include "json_detail.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fedtheory {

using detail::get_or;
using detail::Json;
using detail::require;

namespace {

void reject_unknown(const Json& obj, const std::set<std::string>& known, const std::string& prefix) {
  for (const auto& item : obj.items())
    if (!known.count(item.key())) throw ConfigError(prefix + item.key(), "unknown field");
}

const Json& section(const Json& root, const std::string& key) {
  static const Json empty = Json::object();
  if (!root.contains(key)) return empty;
  const auto& s = root.at(key);
  if (!s.is_object()) throw ConfigError(key, "expected an object");
  return s;
}

SolverSpec parse_solver(const Json& s, std::uint64_t seed) {
  reject_unknown(s, {"method", "steps", "local_lr", "batch_size", "steps_per_client",
                     "lr_per_client", "lr_decay", "noise_seed"}, "solver.");
  SolverSpec out;
  try {
    out.base.method = parse_local_method(get_or<std::string>(s, "method", "gd", "solver."));
  } catch (const InputError& e) {
    throw ConfigError("solver.method", e.what());
  }
  out.base.steps = get_or<std::size_t>(s, "steps", 1, "solver.");
  out.base.local_lr = get_or<double>(s, "local_lr", 0.1, "solver.");
  if (s.contains("batch_size")) out.base.batch_size = require<std::size_t>(s, "batch_size", "solver.");
  out.steps_per_client = get_or<std::vector<std::size_t>>(s, "steps_per_client", {}, "solver.");
  out.lr_per_client = get_or<std::vector<double>>(s, "lr_per_client", {}, "solver.");
  out.noise_seed = get_or<std::uint64_t>(s, "noise_seed", derive_seed(seed, 11), "solver.");
  out.noise_seed_pinned = s.contains("noise_seed");
  if (out.base.steps == 0) throw ConfigError("solver.steps", "must be positive");
  if (!(out.base.local_lr > 0.0)) throw ConfigError("solver.local_lr", "must be positive");
  for (auto k : out.steps_per_client)
    if (k == 0) throw ConfigError("solver.steps_per_client", "entries must be positive");
  for (auto lr : out.lr_per_client)
    if (!(lr > 0.0)) throw ConfigError("solver.lr_per_client", "entries must be positive");
  if (s.contains("lr_decay") && !s.at("lr_decay").is_null()) {
    const auto& d = s.at("lr_decay");
    if (!d.is_object()) throw ConfigError("solver.lr_decay", "expected an object");
    LrDecay decay;
    decay.fraction = get_or<double>(d, "fraction", decay.fraction, "solver.lr_decay.");
    if (!(decay.fraction > 0.0 && decay.fraction <= 1.0))
      throw ConfigError("solver.lr_decay.fraction", "must be in (0, 1]");
    out.lr_decay = decay;
  }
  if (out.base.batch_size && out.base.method != LocalMethod::sgd)
    throw ConfigError("solver.batch_size", "only valid with method sgd");
  return out;
}

ServerSpec parse_server(const Json& s) {
  reject_unknown(s, {"algorithm", "global_lr", "nu", "beta", "beta2", "adaptive", "correction",
                     "oracle_gamma"}, "server.");
  ServerSpec out;
  try {
    out.algorithm = parse_algorithm(get_or<std::string>(s, "algorithm", "la_fedavg", "server."));
  } catch (const InputError& e) {
    throw ConfigError("server.algorithm", e.what());
  }
  auto& h = out.hyper;
  h.global_lr = get_or<double>(s, "global_lr", 1.0, "server.");
  h.nu = get_or<double>(s, "nu", 0.0, "server.");
  h.beta = get_or<double>(s, "beta", 0.0, "server.");
  h.beta2 = get_or<double>(s, "beta2", h.beta2, "server.");
  const auto adaptive = get_or<std::string>(s, "adaptive", "none", "server.");
  if (adaptive == "none") h.adaptive = AdaptiveMode::none;
  else if (adaptive == "scalar") h.adaptive = AdaptiveMode::scalar;
  else if (adaptive == "elementwise") h.adaptive = AdaptiveMode::elementwise;
  else throw ConfigError("server.adaptive", "expected none, scalar or elementwise");
  const auto correction = get_or<std::string>(s, "correction", "none", "server.");
  if (correction == "none") out.correction = CorrectionSource::none;
  else if (correction == "scaffold") out.correction = CorrectionSource::scaffold;
  else if (correction == "oracle") out.correction = CorrectionSource::oracle;
  else throw ConfigError("server.correction", "expected none, scaffold or oracle");
  out.oracle_gamma = get_or<double>(s, "oracle_gamma", out.oracle_gamma, "server.");

  if (!(h.global_lr > 0.0)) throw ConfigError("server.global_lr", "must be positive");
  if (h.nu < 0.0 || h.nu > 1.0) throw ConfigError("server.nu", "must be in [0, 1]");
  if (h.beta < 0.0 || h.beta > 1.0) throw ConfigError("server.beta", "must be in [0, 1]");
  if (h.beta2 < 0.0 || h.beta2 > 1.0) throw ConfigError("server.beta2", "must be in [0, 1]");
  switch (out.algorithm) {
    case Algorithm::la_fedavg:
      if (h.global_lr != 1.0) throw ConfigError("server.global_lr", "la_fedavg uses a global step of 1");
      if (out.correction != CorrectionSource::none)
        throw ConfigError("server.correction", "la_fedavg runs without correction");
      if (h.adaptive != AdaptiveMode::none) throw ConfigError("server.adaptive", "only valid with sa");
      break;
    case Algorithm::dc:
      if (h.adaptive != AdaptiveMode::none) throw ConfigError("server.adaptive", "only valid with sa");
      break;
    case Algorithm::sa:
      if (!s.contains("nu")) throw ConfigError("server.nu", "sa requires nu");
      if (!s.contains("beta")) throw ConfigError("server.beta", "sa requires beta");
      if (out.correction != CorrectionSource::none)
        throw ConfigError("server.correction", "sa runs without correction");
      break;
  }
  return out;
}

ParticipationPolicy parse_participation(const Json& s, std::uint64_t seed) {
  reject_unknown(s, {"mode", "fraction", "seed", "weights"}, "participation.");
  ParticipationPolicy p;
  const auto mode = get_or<std::string>(s, "mode", "all", "participation.");
  if (mode == "all") p.mode = ParticipationMode::all;
  else if (mode == "uniform_fraction") p.mode = ParticipationMode::uniform_fraction;
  else throw ConfigError("participation.mode", "expected all or uniform_fraction");
  p.fraction = get_or<double>(s, "fraction", 1.0, "participation.");
  if (!(p.fraction > 0.0 && p.fraction <= 1.0))
    throw ConfigError("participation.fraction", "must be in (0, 1]");
  p.seed = get_or<std::uint64_t>(s, "seed", derive_seed(seed, 13), "participation.");
  const auto weights = get_or<std::string>(s, "weights", "custom", "participation.");
  if (weights == "custom") p.weight_rule = WeightRule::custom;
  else if (weights == "uniform") p.weight_rule = WeightRule::uniform;
  else if (weights == "samples") p.weight_rule = WeightRule::proportional_to_samples;
  else throw ConfigError("participation.weights", "expected custom, uniform or samples");
  return p;
}

}  // namespace

Algorithm parse_algorithm(const std::string& name) {
  if (name == "la_fedavg") return Algorithm::la_fedavg;
  if (name == "dc") return Algorithm::dc;
  if (name == "sa") return Algorithm::sa;
  throw InputError("unknown algorithm '" + name + "' (expected la_fedavg, dc or sa)");
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::la_fedavg: return "la_fedavg";
    case Algorithm::dc: return "dc";
    case Algorithm::sa: return "sa";
  }
  return "unknown";
}

double lr_decay_factor(const std::optional<LrDecay>& decay, std::size_t t, std::size_t rounds) {
  if (!decay || rounds == 0) return 1.0;
  const auto n = static_cast<std::size_t>(std::ceil(decay->fraction * static_cast<double>(rounds)));
  if (t + n < rounds) return 1.0;
  return static_cast<double>(rounds - t) / static_cast<double>(n + 1);
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", e.what());
  }
  if (!root.is_object()) throw ConfigError("config", "expected a JSON object");
  reject_unknown(root, {"$schema", "description", "seed", "rounds", "x0", "population", "solver",
                        "server", "participation", "diagnostics", "output", "threads"}, "");

  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  cfg.seed = get_or<std::uint64_t>(root, "seed", 0, "");
  cfg.rounds = get_or<std::size_t>(root, "rounds", cfg.rounds, "");
  cfg.threads = get_or<unsigned>(root, "threads", 1, "");
  if (cfg.threads == 0) throw ConfigError("threads", "must be positive");
  if (root.contains("x0")) cfg.x0 = detail::vector_from_json(root.at("x0"), "x0");
  if (!root.contains("population")) throw ConfigError("population", "missing section");
  if (!root.at("population").is_object()) throw ConfigError("population", "expected an object");
  cfg.population_json = root.at("population").dump();

  cfg.solver = parse_solver(section(root, "solver"), cfg.seed);
  cfg.server = parse_server(section(root, "server"));
  cfg.participation = parse_participation(section(root, "participation"), cfg.seed);
  cfg.participation_seed_pinned = section(root, "participation").contains("seed");

  const auto& diag = section(root, "diagnostics");
  reject_unknown(diag, {"dump_A", "tolerance"}, "diagnostics.");
  cfg.diagnostics.dump_A = get_or<bool>(diag, "dump_A", false, "diagnostics.");
  cfg.diagnostics.tolerance = get_or<double>(diag, "tolerance", 1e-9, "diagnostics.");

  const auto& out = section(root, "output");
  reject_unknown(out, {"directory", "log", "summary", "trajectory_csv"}, "output.");
  cfg.output.directory = get_or<std::string>(out, "directory", "", "output.");
  cfg.output.log_name = get_or<std::string>(out, "log", cfg.output.log_name, "output.");
  cfg.output.summary_name = get_or<std::string>(out, "summary", cfg.output.summary_name, "output.");
  cfg.output.trajectory_csv = get_or<std::string>(out, "trajectory_csv", "", "output.");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path().empty() ? "." : path.parent_path());
}

ClientPopulation build_population(const ExperimentConfig& cfg) {
  const auto spec = Json::parse(cfg.population_json);
  auto pop = detail::population_from_json(spec, cfg.base_dir, "population.", derive_seed(cfg.seed, 7));
  const auto n = pop.size();
  if (!cfg.solver.steps_per_client.empty() && cfg.solver.steps_per_client.size() != n)
    throw ConfigError("solver.steps_per_client", "needs one entry per client");
  if (!cfg.solver.lr_per_client.empty() && cfg.solver.lr_per_client.size() != n)
    throw ConfigError("solver.lr_per_client", "needs one entry per client");
  if (cfg.x0 && cfg.x0->size() != pop.dim()) throw ConfigError("x0", "dimension does not match population");
  return pop;
}

void reseed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  if (!cfg.solver.noise_seed_pinned) cfg.solver.noise_seed = derive_seed(seed, 11);
  if (!cfg.participation_seed_pinned) cfg.participation.seed = derive_seed(seed, 13);
}

void set_population_param(ExperimentConfig& cfg, const std::string& key, double value) {
  auto spec = Json::parse(cfg.population_json);
  if (!spec.contains("generator"))
    throw ConfigError("population." + key, "only generator populations can be swept");
  spec[key] = value;
  cfg.population_json = spec.dump();
}

void apply_sweep_value(ExperimentConfig& cfg, const std::string& parameter, double value) {
  if (parameter == "alpha") {
    set_population_param(cfg, "alpha", value);
  } else if (parameter == "participation") {
    if (!(value > 0.0 && value <= 1.0)) throw ConfigError("participation.fraction", "must be in (0, 1]");
    cfg.participation.mode = value >= 1.0 ? ParticipationMode::all : ParticipationMode::uniform_fraction;
    cfg.participation.fraction = value;
  } else if (parameter == "K") {
    if (!(value >= 1.0) || value != std::floor(value)) throw ConfigError("solver.steps", "K must be a positive integer");
    cfg.solver.base.steps = static_cast<std::size_t>(value);
    cfg.solver.steps_per_client.clear();
  } else if (parameter == "eta_l") {
    if (!(value > 0.0)) throw ConfigError("solver.local_lr", "must be positive");
    cfg.solver.base.local_lr = value;
    cfg.solver.lr_per_client.clear();
  } else if (parameter == "nu") {
    if (value < 0.0 || value > 1.0) throw ConfigError("server.nu", "must be in [0, 1]");
    cfg.server.hyper.nu = value;
  } else if (parameter == "beta") {
    if (value < 0.0 || value > 1.0) throw ConfigError("server.beta", "must be in [0, 1]");
    cfg.server.hyper.beta = value;
  } else {
    throw ConfigError("sweep.parameter", "unknown parameter '" + parameter +
                                             "' (expected alpha, participation, K, eta_l, nu, beta)");
  }
}

}  // namespace fedtheory
