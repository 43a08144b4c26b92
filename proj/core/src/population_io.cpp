#include "fedtheory/population_io.hpp"

#include "fedtheory/random.hpp"
#include "json_detail.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace fedtheory {

namespace detail {

Json read_json_file(const std::filesystem::path& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) throw ConfigError(field, "cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(field, "'" + path.string() + "': " + e.what());
  }
}

ModelVector vector_from_json(const Json& value, const std::string& field) {
  if (!value.is_array()) throw ConfigError(field, "expected an array of numbers");
  ModelVector v(static_cast<Eigen::Index>(value.size()));
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number()) throw ConfigError(field, "expected an array of numbers");
    v(static_cast<Eigen::Index>(i)) = value[i].get<double>();
  }
  return v;
}

Json vector_to_json(const ModelVector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

namespace {

LabeledDataset dataset_from_json(const Json& j, const std::string& field) {
  LabeledDataset data;
  data.num_classes = require<int>(j, "num_classes", field + ".");
  const auto& feats = j.at("features");
  const auto& labels = j.at("labels");
  if (!feats.is_array() || !labels.is_array() || feats.size() != labels.size() || feats.empty())
    throw ConfigError(field, "features and labels must be equal-length nonempty arrays");
  const auto p = feats.front().size();
  data.features.resize(static_cast<Eigen::Index>(feats.size()), static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < feats.size(); ++r) {
    if (feats[r].size() != p) throw ConfigError(field, "ragged feature rows");
    for (std::size_t c = 0; c < p; ++c)
      data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          feats[r][c].get<double>();
  }
  data.labels = labels.get<std::vector<int>>();
  return data;
}

ObjectivePtr quadratic_from_json(const Json& c, Eigen::Index dim, const std::string& field) {
  ModelVector center = vector_from_json(c.at("center"), field + ".center");
  if (dim > 0 && center.size() != dim) throw ConfigError(field + ".center", "dimension mismatch");
  const double offset = get_or<double>(c, "offset", 0.0, field + ".");
  const double scale = get_or<double>(c, "scale", 1.0, field + ".");
  const auto d = center.size();
  Matrix q;
  const Json curv = c.contains("curvature") ? c.at("curvature") : Json("identity");
  if (curv.is_string()) {
    if (curv.get<std::string>() != "identity")
      throw ConfigError(field + ".curvature", "expected \"identity\" or a matrix");
    q = scale * Matrix::Identity(d, d);
  } else {
    if (!curv.is_array() || curv.size() != static_cast<std::size_t>(d))
      throw ConfigError(field + ".curvature", "expected d rows");
    q.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
      q.row(r) = scale * vector_from_json(curv[static_cast<std::size_t>(r)],
                                          field + ".curvature").transpose();
  }
  try {
    return std::make_shared<QuadraticObjective>(std::move(center), std::move(q), offset);
  } catch (const InputError& e) {
    throw ConfigError(field, e.what());
  }
}

ClientPopulation explicit_population(const Json& spec, const std::filesystem::path& base_dir,
                                     const std::string& prefix) {
  const auto dim = get_or<Eigen::Index>(spec, "dim", 0, prefix);
  if (!spec.contains("clients") || !spec.at("clients").is_array() || spec.at("clients").empty())
    throw ConfigError(prefix + "clients", "expected a nonempty array");
  std::map<std::string, std::shared_ptr<const LabeledDataset>> datasets;
  std::vector<ObjectivePtr> clients;
  const auto& list = spec.at("clients");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& c = list[i];
    const std::string field = prefix + "clients[" + std::to_string(i) + "]";
    const auto type = require<std::string>(c, "type", field + ".");
    if (type == "quadratic") {
      clients.push_back(quadratic_from_json(c, dim, field));
    } else if (type == "logistic") {
      const auto ref = require<std::string>(c, "data_ref", field + ".");
      auto& data = datasets[ref];
      if (!data)
        data = std::make_shared<LabeledDataset>(
            dataset_from_json(read_json_file(base_dir / ref, field + ".data_ref"),
                              field + ".data_ref"));
      LogisticObjective::Options opts;
      opts.l2_reg = get_or<double>(c, "l2_reg", opts.l2_reg, field + ".");
      opts.opt_tol = get_or<double>(c, "opt_tol", opts.opt_tol, field + ".");
      try {
        if (c.contains("indices"))
          clients.push_back(std::make_shared<LogisticObjective>(
              data, c.at("indices").get<std::vector<std::size_t>>(), opts));
        else
          clients.push_back(std::make_shared<LogisticObjective>(data, opts));
      } catch (const InputError& e) {
        throw ConfigError(field, e.what());
      }
      if (dim > 0 && clients.back()->dim() != dim)
        throw ConfigError(field, "dimension does not match population dim");
    } else {
      throw ConfigError(field + ".type", "unknown client type '" + type + "'");
    }
  }
  try {
    if (spec.contains("weights"))
      return ClientPopulation(std::move(clients), spec.at("weights").get<std::vector<double>>());
    return ClientPopulation(std::move(clients));
  } catch (const InputError& e) {
    throw ConfigError(prefix + "weights", e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(prefix + "weights", e.what());
  }
}

}  // namespace

ClientPopulation population_from_json(const Json& spec, const std::filesystem::path& base_dir,
                                      const std::string& prefix, std::uint64_t default_seed) {
  if (!spec.is_object()) throw ConfigError(prefix.empty() ? "population" : prefix, "expected an object");
  if (spec.contains("file")) {
    const auto path = base_dir / require<std::string>(spec, "file", prefix);
    return population_from_json(read_json_file(path, prefix + "file"), path.parent_path(),
                                prefix, default_seed);
  }
  if (!spec.contains("generator")) return explicit_population(spec, base_dir, prefix);

  const auto generator = require<std::string>(spec, "generator", prefix);
  const auto seed = get_or<std::uint64_t>(spec, "seed", default_seed, prefix);
  if (generator == "paraboloid") {
    ParaboloidSpec p;
    p.num_clients = get_or<std::size_t>(spec, "clients", p.num_clients, prefix);
    p.dim = get_or<Eigen::Index>(spec, "dim", p.dim, prefix);
    p.scale = get_or<double>(spec, "scale", p.scale, prefix);
    p.curvature = get_or<double>(spec, "curvature", p.curvature, prefix);
    p.seed = seed;
    try {
      p.distribution = parse_optimum_distribution(
          get_or<std::string>(spec, "distribution", "mixed", prefix));
      return make_paraboloid(p);
    } catch (const InputError& e) {
      throw ConfigError(prefix + "generator", e.what());
    }
  }
  if (generator == "logistic_dirichlet") {
    LogisticDirichletSpec s;
    s.num_clients = get_or<std::size_t>(spec, "clients", s.num_clients, prefix);
    s.alpha = get_or<double>(spec, "alpha", s.alpha, prefix);
    s.num_classes = get_or<int>(spec, "num_classes", s.num_classes, prefix);
    s.samples_per_class = get_or<std::size_t>(spec, "samples_per_class", s.samples_per_class, prefix);
    s.feature_dim = get_or<Eigen::Index>(spec, "feature_dim", s.feature_dim, prefix);
    s.class_separation = get_or<double>(spec, "class_separation", s.class_separation, prefix);
    s.l2_reg = get_or<double>(spec, "l2_reg", s.l2_reg, prefix);
    s.min_threshold = get_or<std::size_t>(spec, "min_threshold", s.min_threshold, prefix);
    s.weights_by_samples = get_or<std::string>(spec, "weights", "uniform", prefix) == "samples";
    s.seed = seed;
    try {
      return make_logistic_dirichlet(s).population;
    } catch (const InputError& e) {
      throw ConfigError(prefix + "generator", e.what());
    }
  }
  throw ConfigError(prefix + "generator", "unknown generator '" + generator + "'");
}

}  // namespace detail

ClientPopulation load_population(const std::filesystem::path& path) {
  return detail::population_from_json(detail::read_json_file(path, "population"),
                                      path.parent_path(), "", 0);
}

ClientPopulation parse_population(const std::string& json_text,
                                  const std::filesystem::path& base_dir) {
  detail::Json j;
  try {
    j = detail::Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("population", e.what());
  }
  return detail::population_from_json(j, base_dir, "", 0);
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  return detail::dataset_from_json(detail::read_json_file(path, "dataset"), "dataset");
}

void save_dataset(const LabeledDataset& data, const std::filesystem::path& path) {
  detail::Json j;
  j["num_classes"] = data.num_classes;
  j["labels"] = data.labels;
  auto rows = detail::Json::array();
  for (Eigen::Index r = 0; r < data.features.rows(); ++r)
    rows.push_back(detail::vector_to_json(data.features.row(r).transpose()));
  j["features"] = std::move(rows);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump() << '\n';
}

OptimumDistribution parse_optimum_distribution(const std::string& name) {
  if (name == "gaussian") return OptimumDistribution::gaussian;
  if (name == "laplace") return OptimumDistribution::laplace;
  if (name == "mixed") return OptimumDistribution::mixed;
  throw InputError("unknown optimum distribution '" + name + "'");
}

ClientPopulation make_paraboloid(const ParaboloidSpec& spec) {
  if (spec.num_clients == 0 || spec.dim <= 0) throw InputError("paraboloid: sizes must be positive");
  if (!(spec.curvature > 0.0)) throw InputError("paraboloid: curvature must be positive");
  Rng rng(mix_seed(spec.seed));
  std::normal_distribution<double> gauss(0.0, spec.scale);
  std::vector<ObjectivePtr> clients;
  clients.reserve(spec.num_clients);
  for (std::size_t i = 0; i < spec.num_clients; ++i) {
    const bool use_laplace =
        spec.distribution == OptimumDistribution::laplace ||
        (spec.distribution == OptimumDistribution::mixed && i >= spec.num_clients / 2);
    ModelVector center(spec.dim);
    for (Eigen::Index k = 0; k < spec.dim; ++k)
      center(k) = use_laplace ? laplace(rng, spec.scale) : gauss(rng);
    clients.push_back(std::make_shared<QuadraticObjective>(
        QuadraticObjective::isotropic(std::move(center), spec.curvature)));
  }
  return ClientPopulation(std::move(clients));
}

LogisticPopulation make_logistic_dirichlet(const LogisticDirichletSpec& spec) {
  LogisticPopulation out;
  out.data = std::make_shared<const LabeledDataset>(
      make_synthetic_dataset(spec.num_classes, spec.samples_per_class, spec.feature_dim,
                             spec.class_separation, derive_seed(spec.seed, 1)));
  PartitionSpec ps;
  ps.num_clients = spec.num_clients;
  ps.alpha = spec.alpha;
  ps.min_threshold = std::max<std::size_t>(spec.min_threshold, 1);
  ps.seed = derive_seed(spec.seed, 2);
  out.partition = split(out.data->labels, ps);

  LogisticObjective::Options opts;
  opts.l2_reg = spec.l2_reg;
  std::vector<ObjectivePtr> clients;
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& rows : out.partition.assignments) {
    clients.push_back(std::make_shared<LogisticObjective>(out.data, rows, opts));
    weights.push_back(spec.weights_by_samples ? static_cast<double>(rows.size()) : 1.0);
    total += weights.back();
  }
  for (auto& w : weights) w /= total;
  out.population = ClientPopulation(std::move(clients), std::move(weights));
  return out;
}

}  // namespace fedtheory
