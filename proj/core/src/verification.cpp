#include "fedtheory/verification.hpp"

#include "fedtheory/decoupling.hpp"
#include "fedtheory/errors.hpp"
#include "fedtheory/local_solver.hpp"
#include "fedtheory/server.hpp"
#include "fedtheory/theory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fedtheory {

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// One randomized round: clients, weights, per-client solver settings and x_t.
struct RandomRound {
  std::vector<ObjectivePtr> clients;
  std::vector<double> weights;
  std::vector<LocalSolverConfig> solvers;
  ModelVector x_t;
};

ObjectivePtr random_logistic(Rng& rng, Eigen::Index d) {
  const Eigen::Index p = d / 2;
  auto data = std::make_shared<LabeledDataset>();
  data->num_classes = 2;
  const Eigen::Index rows = 24;
  data->features.resize(rows, p);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int y = static_cast<int>(r % 2);
    data->labels.push_back(y);
    for (Eigen::Index k = 0; k < p; ++k) data->features(r, k) = gauss(rng) + (y == 1 ? 0.5 : -0.5);
  }
  LogisticObjective::Options opts;
  opts.l2_reg = 0.1;
  return std::make_shared<LogisticObjective>(data, opts);
}

RandomRound random_round(Rng& rng, bool allow_sampled) {
  static const Eigen::Index dims[] = {2, 10, 50};
  RandomRound round;
  const Eigen::Index d = dims[pick(rng, 0, 2)];
  const std::size_t n = pick(rng, 1, 20);
  round.weights = dirichlet(rng, 1.0, n);
  double total = 0.0;
  for (double w : round.weights) total += w;
  for (auto& w : round.weights) w /= total;

  const bool overshoot = uniform(rng, 0.0, 1.0) < 0.1;
  for (std::size_t i = 0; i < n; ++i) {
    LocalSolverConfig cfg;
    cfg.steps = pick(rng, 1, 6);
    cfg.noise_seed = rng();
    double lambda_max = 1.0;
    if (allow_sampled && uniform(rng, 0.0, 1.0) < 0.1) {
      round.clients.push_back(random_logistic(rng, d));
      cfg.method = LocalMethod::sgd;
      cfg.batch_size = pick(rng, 1, round.clients.back()->sample_count());
      lambda_max = 4.0;
    } else {
      auto q = std::make_shared<QuadraticObjective>(random_gaussian(rng, d, 3.0),
                                                    random_spd(rng, d, 0.2, 5.0),
                                                    uniform(rng, 0.0, 1.0));
      lambda_max = q->lambda_max();
      round.clients.push_back(std::move(q));
      switch (pick(rng, 0, 2)) {
        case 0: cfg.method = LocalMethod::exact_solve; break;
        case 1: cfg.method = LocalMethod::gd; break;
        default: cfg.method = LocalMethod::nesterov; break;
      }
    }
    cfg.local_lr = overshoot ? uniform(rng, 2.0, 2.4) / lambda_max : uniform(rng, 0.05, 1.9) / lambda_max;
    if (cfg.method == LocalMethod::nesterov && overshoot) cfg.local_lr = uniform(rng, 0.05, 1.0) / lambda_max;
    round.solvers.push_back(cfg);
  }
  round.x_t = random_gaussian(rng, d, 5.0);
  return round;
}

std::vector<ClientRoundRecord> to_records(const RandomRound& round,
                                          const std::vector<LocalRunResult>& results) {
  std::vector<ClientRoundRecord> records;
  for (std::size_t i = 0; i < results.size(); ++i)
    records.push_back(make_record(i, round.weights[i], round.clients[i]->optimum(), results[i]));
  return records;
}

ModelVector weighted_optimum(const RandomRound& round) {
  ModelVector c = ModelVector::Zero(round.x_t.size());
  for (std::size_t i = 0; i < round.clients.size(); ++i)
    c += round.weights[i] * round.clients[i]->optimum();
  return c;
}

}  // namespace

void SuiteResult::note(const std::string& key, double value) {
  details.emplace_back(key, format_double(value));
}

void SuiteResult::note(const std::string& key, const std::string& value) {
  details.emplace_back(key, value);
}

Matrix random_spd(Rng& rng, Eigen::Index d, double lo, double hi) {
  Matrix g(d, d);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) g(r, c) = gauss(rng);
  const Matrix u = Eigen::HouseholderQR<Matrix>(g).householderQ();
  Eigen::VectorXd eig(d);
  for (Eigen::Index k = 0; k < d; ++k) eig(k) = uniform(rng, lo, hi);
  Matrix q = u * eig.asDiagonal() * u.transpose();
  return 0.5 * (q + q.transpose());
}

ModelVector random_gaussian(Rng& rng, Eigen::Index d, double scale) {
  std::normal_distribution<double> gauss(0.0, scale);
  ModelVector v(d);
  for (Eigen::Index k = 0; k < d; ++k) v(k) = gauss(rng);
  return v;
}

SuiteResult theorem2_suite(const SuiteOptions& opts) {
  SuiteResult res;
  res.name = "theorem2";
  res.trials = opts.trials ? opts.trials : 1000;
  Rng rng(mix_seed(opts.seed ^ 0x7432));
  std::size_t over_one = 0;
  for (std::size_t t = 0; t < res.trials; ++t) {
    const auto round = random_round(rng, true);
    std::vector<LocalRunResult> results;
    for (std::size_t i = 0; i < round.clients.size(); ++i)
      results.push_back(run_local(*round.clients[i], round.x_t, round.solvers[i]));
    const auto g = aggregate(results, round.weights, round.x_t);
    const auto next = step_fedavg(ServerState::initial(round.x_t), g);
    const auto records = to_records(round, results);
    const auto check = verify_theorem2(round.x_t, next.x, records);
    res.max_residual = std::max(res.max_residual, check.relative());
    if (!check.holds(opts.tolerance)) ++res.failures;
    for (const auto& r : results) over_one += r.sigma_exceeds_one ? 1 : 0;
  }
  res.passed = res.failures == 0;
  res.note("client runs with sigma > 1", static_cast<double>(over_one));
  return res;
}

SuiteResult theorem3_suite(const SuiteOptions& opts) {
  SuiteResult res;
  res.name = "theorem3";
  res.trials = opts.trials ? opts.trials : 1000;
  Rng rng(mix_seed(opts.seed ^ 0x7433));
  std::size_t effective_oracle = 0, beats_counterfactual = 0, beats_rerun = 0;
  std::size_t oracle_rounds = 0, fallback_rounds = 0;
  for (std::size_t t = 0; t < res.trials; ++t) {
    const auto round = random_round(rng, false);
    const double eta = uniform(rng, 1e-3, 1.0);
    const bool oracle = t % 2 == 1;
    const double gamma = uniform(rng, 0.01, 0.5);
    const ModelVector center = weighted_optimum(round);
    const double h_scale = uniform(rng, 0.0, 2.0);

    std::vector<LocalRunResult> results, plain;
    for (std::size_t i = 0; i < round.clients.size(); ++i) {
      const auto& cfg = round.solvers[i];
      const ModelVector h =
          oracle ? ModelVector(gamma * (center - round.x_t) /
                               (cfg.local_lr * static_cast<double>(cfg.steps)))
                 : random_gaussian(rng, round.x_t.size(), h_scale);
      results.push_back(run_local(*round.clients[i], round.x_t, cfg, h));
      if (oracle) plain.push_back(run_local(*round.clients[i], round.x_t, cfg));
    }
    const auto g = aggregate(results, round.weights, round.x_t);
    const auto state = ServerState::initial(round.x_t);
    const auto next = step_dc(state, g, eta);
    const auto records = to_records(round, results);
    const auto dc = verify_theorem3(round.x_t, next.x, records, g.correction, eta);
    res.max_residual = std::max(res.max_residual, dc.relative());
    if (!dc.holds(opts.tolerance)) ++res.failures;
    fallback_rounds += dc.sigma_fallback ? 1 : 0;

    if (oracle) {
      ++oracle_rounds;
      if (dc.effective) {
        ++effective_oracle;
        // Same pseudo-gradient, correction removed.
        const double counterfactual = (round.x_t - eta * g.value - center).squaredNorm();
        if (dc.observed <= counterfactual) ++beats_counterfactual;
        // Clients rerun without correction.
        const auto g0 = aggregate(plain, round.weights, round.x_t);
        const double rerun = (step_dc(state, g0, eta).x - center).squaredNorm();
        if (dc.observed <= rerun) ++beats_rerun;
      }
    }
  }
  const double rate = effective_oracle ? static_cast<double>(beats_counterfactual) /
                                             static_cast<double>(effective_oracle)
                                       : 1.0;
  res.passed = res.failures == 0 && rate >= 0.99;
  res.note("oracle rounds", static_cast<double>(oracle_rounds));
  res.note("oracle rounds meeting the effectiveness condition", static_cast<double>(effective_oracle));
  res.note("fraction no farther than the same-G counterfactual", rate);
  res.note("fraction no farther than a correction-free rerun",
           effective_oracle ? static_cast<double>(beats_rerun) / static_cast<double>(effective_oracle)
                            : 1.0);
  res.note("rounds using the measured ||a|| for sigma_D", static_cast<double>(fallback_rounds));
  return res;
}

SuiteResult theorem4_suite(const SuiteOptions& opts) {
  SuiteResult res;
  res.name = "theorem4";
  res.trials = opts.trials ? opts.trials : 1000;
  Rng rng(mix_seed(opts.seed ^ 0x7434));
  for (std::size_t t = 0; t < res.trials; ++t) {
    const auto round = random_round(rng, false);
    std::vector<LocalRunResult> results;
    for (std::size_t i = 0; i < round.clients.size(); ++i)
      results.push_back(run_local(*round.clients[i], round.x_t, round.solvers[i]));
    const auto g = aggregate(results, round.weights, round.x_t);

    ServerState state = ServerState::initial(round.x_t);
    state.d_prev = random_gaussian(rng, round.x_t.size(), uniform(rng, 0.0, 3.0));
    state.v_prev = random_gaussian(rng, round.x_t.size(), 2.0).cwiseAbs2();
    ServerHyper hyper;
    hyper.global_lr = uniform(rng, 1e-3, 1.0);
    hyper.nu = uniform(rng, 0.0, 1.0);
    hyper.beta = uniform(rng, 0.0, 1.0);
    hyper.beta2 = uniform(rng, 0.0, 1.0);
    hyper.adaptive = t % 10 == 0 ? AdaptiveMode::none : AdaptiveMode::scalar;
    SAStepInfo info;
    const auto next = step_sa(state, g, hyper, &info);
    const auto records = to_records(round, results);
    const auto sa = verify_theorem4(round.x_t, next.x, records, info.d_prev, info.eta_phi,
                                    hyper.nu, hyper.beta);
    res.max_residual = std::max(res.max_residual, sa.relative());
    if (!sa.holds(opts.tolerance)) ++res.failures;
  }
  res.passed = res.failures == 0;
  return res;
}

SuiteResult decoupling_suite(const SuiteOptions& opts) {
  SuiteResult res;
  res.name = "decoupling";
  const std::size_t trials = opts.trials ? opts.trials : 100000;
  Rng rng(mix_seed(opts.seed ^ 0x7435));
  constexpr std::size_t kFamilies = 10;
  res.trials = kFamilies + 1;
  double worst_z = 0.0;
  for (std::size_t f = 0; f < kFamilies; ++f) {
    const std::size_t n = pick(rng, 2, 8);
    const Eigen::Index d = static_cast<Eigen::Index>(pick(rng, 1, 5));
    Matrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = i == j ? 0.0 : gauss(rng);
    std::vector<ModelVector> means, scales;
    for (std::size_t i = 0; i < n; ++i) {
      means.push_back(random_gaussian(rng, d, 1.0));
      scales.push_back(random_gaussian(rng, d, 1.0).cwiseAbs());
    }
    const VectorFamilySampler sampler = [&](Rng& r) {
      std::normal_distribution<double> z(0.0, 1.0);
      std::vector<ModelVector> x(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i].resize(d);
        for (Eigen::Index k = 0; k < d; ++k) x[i](k) = means[i](k) + scales[i](k) * z(r);
      }
      return x;
    };
    const auto report = decoupling_check(a, sampler, trials, rng());
    const double z = report.mc_stderr > 0.0 ? std::abs(report.mc_lhs - report.mc_rhs) / report.mc_stderr : 0.0;
    worst_z = std::max(worst_z, z);
    if (!report.equal_within(3.0)) ++res.failures;
  }

  // Point mass: X is deterministic, selectors averaged exactly.
  std::vector<ModelVector> fixed = {random_gaussian(rng, 3, 1.0), random_gaussian(rng, 3, 1.0)};
  Matrix a(2, 2);
  a << 0.0, 1.0, 1.0, 0.0;
  const auto point = decoupling_check(a, [&](Rng&) { return fixed; }, 1, 0, SelectorMode::averaged);
  const double expected = 2.0 * fixed[0].dot(fixed[1]);
  const double point_err = std::max(std::abs(point.mc_lhs - expected), std::abs(point.mc_rhs - expected));
  if (point_err > 1e-12) ++res.failures;

  res.max_residual = worst_z;
  res.passed = res.failures == 0;
  res.note("worst |lhs - rhs| / stderr", worst_z);
  res.note("point-mass error", point_err);
  return res;
}

SuiteResult bounds_suite(const SuiteOptions& opts) {
  SuiteResult res;
  res.name = "bounds";
  res.trials = opts.trials ? opts.trials : 100;
  Rng rng(mix_seed(opts.seed ^ 0x7436));
  std::size_t contained = 0, analytic_ok = 0;
  for (std::size_t t = 0; t < res.trials; ++t) {
    const std::size_t n = pick(rng, 2, 10);
    const Eigen::Index d = static_cast<Eigen::Index>(pick(rng, 2, 10));
    const ModelVector base = random_gaussian(rng, d, 1.0).normalized() * uniform(rng, 1.0, 5.0);
    const double spread = uniform(rng, 0.0, 0.6);
    std::vector<ClientRoundRecord> records;
    auto weights = dirichlet(rng, 5.0, n);
    double total = 0.0;
    for (double w : weights) total += w;
    for (std::size_t i = 0; i < n; ++i) {
      ClientRoundRecord r;
      r.client = i;
      r.weight = weights[i] / total;
      r.delta = base + spread * base.norm() * random_gaussian(rng, d, 1.0) / std::sqrt(static_cast<double>(d));
      r.optimum = ModelVector::Zero(d);
      r.delta_end = ModelVector::Zero(d);
      records.push_back(std::move(r));
    }
    const auto report = expected_descent_bounds(records, 20000, rng());
    if (!report.applicable) {
      --t;  // redraw: the corollary needs positive pairwise cosines
      continue;
    }
    if (report.contained(3.0)) ++contained;
    if (std::abs(report.mc_lhs - report.analytic) <= 4.0 * report.mc_stderr) ++analytic_ok;
  }
  const double rate = static_cast<double>(contained) / static_cast<double>(res.trials);
  res.failures = res.trials - contained;
  res.passed = rate >= 0.95;
  res.max_residual = 1.0 - rate;
  res.note("fraction of configs with E[Delta] inside the bounds", rate);
  res.note("fraction with Monte-Carlo matching the closed form (4 stderr)",
           static_cast<double>(analytic_ok) / static_cast<double>(res.trials));
  return res;
}

SuiteResult lowerbound_suite(const SuiteOptions& opts) {
  SuiteResult res;
  res.name = "lowerbound";
  res.trials = opts.trials ? opts.trials : 10000;
  Rng rng(mix_seed(opts.seed ^ 0x7437));
  std::size_t isotropic = 0, isotropic_equal = 0;
  double worst_gap = 0.0;
  for (std::size_t t = 0; t < res.trials; ++t) {
    const std::size_t n = pick(rng, 1, 8);
    const Eigen::Index d = static_cast<Eigen::Index>(pick(rng, 1, 5));
    const bool iso = t % 2 == 0;
    const double lambda = uniform(rng, 0.1, 5.0);
    std::vector<ObjectivePtr> clients;
    for (std::size_t i = 0; i < n; ++i) {
      Matrix q = iso ? Matrix(lambda * Matrix::Identity(d, d)) : random_spd(rng, d, 0.1, 5.0);
      clients.push_back(std::make_shared<QuadraticObjective>(random_gaussian(rng, d, 2.0), q,
                                                             uniform(rng, 0.0, 1.0)));
    }
    const ClientPopulation pop(std::move(clients));
    const ModelVector x = random_gaussian(rng, d, 4.0);
    const double f = global_objective(pop, x);
    const double lb = lower_bound(pop, x);
    const double scale = std::max(1.0, std::abs(f));
    if (lb > f + 1e-12 * scale) ++res.failures;
    res.max_residual = std::max(res.max_residual, (lb - f) / scale);
    if (iso) {
      ++isotropic;
      const double gap = std::abs(f - lb) / scale;
      worst_gap = std::max(worst_gap, gap);
      if (gap <= opts.tolerance) ++isotropic_equal;
    }
  }
  res.passed = res.failures == 0;
  res.note("isotropic populations", static_cast<double>(isotropic));
  res.note("isotropic populations with bound equal to F (1e-9)", static_cast<double>(isotropic_equal));
  res.note("worst isotropic relative gap", worst_gap);
  return res;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"theorem2", "theorem3", "theorem4",
                                                 "decoupling", "bounds", "lowerbound"};
  return names;
}

std::vector<SuiteResult> run_suite(const std::string& name, const SuiteOptions& opts) {
  if (name == "all") {
    std::vector<SuiteResult> out;
    for (const auto& n : suite_names()) out.push_back(run_suite(n, opts).front());
    return out;
  }
  if (name == "theorem2") return {theorem2_suite(opts)};
  if (name == "theorem3") return {theorem3_suite(opts)};
  if (name == "theorem4") return {theorem4_suite(opts)};
  if (name == "decoupling") return {decoupling_suite(opts)};
  if (name == "bounds") return {bounds_suite(opts)};
  if (name == "lowerbound") return {lowerbound_suite(opts)};
  throw InputError("unknown suite '" + name + "'");
}

}  // namespace fedtheory
