#include "fedtheory/experiment.hpp"

#include "fedtheory/errors.hpp"
#include "fedtheory/projection.hpp"
#include "fedtheory/random.hpp"
#include "json_detail.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

namespace fedtheory {

using detail::Json;
using detail::vector_to_json;

namespace {

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Json initial_record(const TrajectoryLog& log, const ClientPopulation& pop, const ExperimentConfig& cfg) {
  Json j;
  j["type"] = "initial";
  j["round"] = 0;
  j["algorithm"] = to_string(cfg.server.algorithm);
  j["clients"] = pop.size();
  j["dim"] = pop.dim();
  j["x"] = vector_to_json(log.x0);
  j["center"] = vector_to_json(log.center);
  j["region_radius"] = log.radius;
  j["heterogeneity"] = log.heterogeneity;
  j["distance"] = (log.x0 - log.center).norm();
  return j;
}

Json round_record(const RoundLog& r) {
  Json j;
  j["type"] = "round";
  j["round"] = r.round;
  j["x"] = vector_to_json(r.x);
  j["x_next"] = vector_to_json(r.x_next);
  Json clients = Json::array(), weights = Json::array(), sigmas = Json::array(),
       lrs = Json::array(), steps = Json::array();
  for (const auto& c : r.clients) {
    clients.push_back(c.client);
    weights.push_back(c.weight);
    sigmas.push_back(c.sigma);
    lrs.push_back(c.local_lr);
    steps.push_back(c.steps);
  }
  j["clients"] = clients;
  j["weights"] = weights;
  j["sigma"] = sigmas;
  j["local_lr"] = lrs;
  j["steps"] = steps;
  const auto& d = r.diagnostics;
  j["descent"] = d.descent;
  j["descent_prefactored"] = d.descent_prefactored;
  j["weighted_center"] = vector_to_json(d.weighted_center);
  j["mean_pairwise_cos"] = d.mean_pairwise_cos ? Json(*d.mean_pairwise_cos) : Json(nullptr);
  j["region_radius"] = d.region_radius;
  j["distance"] = d.distance_to_center;
  j["in_region"] = d.in_region;
  j["distance_next"] = r.distance_next;
  j["g_norm"] = r.g_norm;
  j["h_norm"] = r.h_norm;
  j["identity"] = to_string(r.identity);
  j["residual"] = r.residual ? Json(*r.residual) : Json(nullptr);
  if (r.dc) {
    const auto& dc = *r.dc;
    j["dc"] = {{"wp", dc.wp},           {"hbar", dc.hbar},
               {"eth", dc.eth},         {"sigma_delta", dc.sigma_delta},
               {"h_norm", dc.h_norm},   {"effective", dc.effective},
               {"direction_ok", dc.direction_ok}, {"norm_ok", dc.norm_ok},
               {"sigma_fallback", dc.sigma_fallback}};
  }
  if (r.sa) {
    const auto& sa = *r.sa;
    j["sa"] = {{"eta_hat", sa.eta_hat}, {"eta_mom", sa.eta_mom}, {"wp", sa.wp},
               {"hbar", sa.hbar},       {"eth", sa.eth},         {"sigma_delta", sa.sigma_delta},
               {"d_prev_norm", sa.d_prev_norm}, {"sigma_fallback", sa.sigma_fallback}};
  }
  return j;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& a,
                      const std::vector<ClientLog>& clients) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << std::setprecision(17) << "client";
  for (const auto& c : clients) out << ',' << c.client;
  out << '\n';
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    out << clients[static_cast<std::size_t>(i)].client;
    for (Eigen::Index j = 0; j < a.cols(); ++j) out << ',' << a(i, j);
    out << '\n';
  }
}

}  // namespace

std::string to_string(IdentityKind kind) {
  switch (kind) {
    case IdentityKind::theorem2: return "la_fedavg";
    case IdentityKind::theorem3: return "corrected";
    case IdentityKind::theorem4: return "momentum";
    case IdentityKind::approximate: return "approximate";
  }
  return "unknown";
}

TrajectoryLog run_experiment(const ExperimentConfig& cfg, const ClientPopulation& pop,
                             const ExperimentSink& sink) {
  const auto n = pop.size();
  const auto d = pop.dim();
  const auto optima = pop.optima();  // resolves lazily computed optima before fan-out

  TrajectoryLog log;
  log.x0 = cfg.x0 ? *cfg.x0 : ModelVector(ModelVector::Zero(d));
  if (log.x0.size() != d) throw ConfigError("x0", "dimension does not match population");
  log.center = mean_of(optima);
  log.radius = n >= 2 ? region_radius(optima) : 0.0;
  log.heterogeneity = heterogeneity(optima);

  const auto emit = [&](const Json& j) {
    if (sink.log == nullptr) return;
    *sink.log << j.dump() << '\n';
    sink.log->flush();
  };
  emit(initial_record(log, pop, cfg));

  const auto steps_of = [&](std::size_t i) {
    return cfg.solver.steps_per_client.empty() ? cfg.solver.base.steps
                                               : cfg.solver.steps_per_client[i];
  };
  const auto lr_of = [&](std::size_t i) {
    return cfg.solver.lr_per_client.empty() ? cfg.solver.base.local_lr : cfg.solver.lr_per_client[i];
  };

  std::vector<ModelVector> control(n, ModelVector::Zero(d));  // SCAFFOLD c_i
  ServerState state = ServerState::initial(log.x0);
  const auto& hyper = cfg.server.hyper;

  try {
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
      const RoundSample sample = sample_round(pop, cfg.participation, t);
      const auto m = sample.clients.size();
      const double decay = lr_decay_factor(cfg.solver.lr_decay, t, cfg.rounds);

      ModelVector sampled_center = ModelVector::Zero(d);
      for (std::size_t p = 0; p < m; ++p) sampled_center += sample.weights[p] * optima[sample.clients[p]];
      ModelVector control_mean = ModelVector::Zero(d);
      if (cfg.server.correction == CorrectionSource::scaffold) {
        for (const auto& c : control) control_mean += c;
        control_mean /= static_cast<double>(n);
      }

      std::vector<LocalSolverConfig> solver(m, cfg.solver.base);
      std::vector<std::optional<ModelVector>> corrections(m);
      for (std::size_t p = 0; p < m; ++p) {
        const auto i = sample.clients[p];
        solver[p].steps = steps_of(i);
        solver[p].local_lr = lr_of(i) * decay;
        solver[p].noise_seed = derive_seed(cfg.solver.noise_seed, i, t);
        // Clients holding fewer samples than the batch size use their whole set.
        if (solver[p].batch_size && pop.clients[i]->sample_count() > 0)
          solver[p].batch_size = std::min(*solver[p].batch_size, pop.clients[i]->sample_count());
        switch (cfg.server.correction) {
          case CorrectionSource::none: break;
          case CorrectionSource::scaffold: corrections[p] = control[i] - control_mean; break;
          case CorrectionSource::oracle:
            corrections[p] = cfg.server.oracle_gamma * (sampled_center - state.x) /
                             (solver[p].local_lr * static_cast<double>(solver[p].steps));
            break;
        }
      }

      std::vector<LocalRunResult> results(m);
      parallel_for(m, cfg.threads, [&](std::size_t p) {
        results[p] = run_local(*pop.clients[sample.clients[p]], state.x, solver[p], corrections[p]);
      });

      if (cfg.server.correction == CorrectionSource::scaffold) {
        for (std::size_t p = 0; p < m; ++p) {
          const auto& r = results[p];
          control[sample.clients[p]] = (state.x - (r.x_end - r.applied_correction)) /
                                       (solver[p].local_lr * static_cast<double>(solver[p].steps));
        }
      }

      const PseudoGradient g = aggregate(results, sample.weights, state.x, sample.clients);
      ServerState next;
      SAStepInfo info;
      switch (cfg.server.algorithm) {
        case Algorithm::la_fedavg: next = step_fedavg(state, g); break;
        case Algorithm::dc: next = step_dc(state, g, hyper.global_lr); break;
        case Algorithm::sa: next = step_sa(state, g, hyper, &info); break;
      }

      std::vector<ClientRoundRecord> records;
      records.reserve(m);
      RoundLog r;
      r.round = t;
      r.x = state.x;
      r.x_next = next.x;
      for (std::size_t p = 0; p < m; ++p) {
        const auto i = sample.clients[p];
        records.push_back(make_record(i, sample.weights[p], optima[i], results[p]));
        r.clients.push_back({i, sample.weights[p], results[p].sigma, solver[p].local_lr, solver[p].steps});
      }
      r.diagnostics = diagnose_round(state.x, records, optima);
      r.g_norm = g.value.norm();
      r.h_norm = g.correction.norm();
      r.distance_next = (next.x - log.center).norm();

      switch (cfg.server.algorithm) {
        case Algorithm::la_fedavg:
          r.identity = IdentityKind::theorem2;
          r.residual = verify_theorem2(state.x, next.x, records).relative();
          break;
        case Algorithm::dc:
          r.identity = IdentityKind::theorem3;
          r.dc = verify_theorem3(state.x, next.x, records, g.correction, hyper.global_lr);
          r.residual = r.dc->relative();
          break;
        case Algorithm::sa:
          if (hyper.adaptive != AdaptiveMode::elementwise) {
            r.identity = IdentityKind::theorem4;
            r.sa = verify_theorem4(state.x, next.x, records, info.d_prev, info.eta_phi,
                                   hyper.nu, hyper.beta);
            r.residual = r.sa->relative();
          }
          break;
      }

      if (!sink.matrix_dir.empty())
        write_matrix_csv(sink.matrix_dir / ("A_" + std::to_string(t) + ".csv"),
                         r.diagnostics.A, r.clients);
      emit(round_record(r));
      log.rounds.push_back(std::move(r));
      state = std::move(next);
    }
  } catch (const DivergenceError& e) {
    log.status = std::string("diverged: ") + e.what();
    emit(Json{{"type", "abort"}, {"round", log.rounds.size()}, {"reason", e.what()}});
    throw;
  }
  return log;
}

ExperimentSummary summarize(const TrajectoryLog& log, const ClientPopulation& pop,
                            double tolerance) {
  ExperimentSummary s;
  s.rounds = log.rounds.size();
  s.status = log.status;
  s.heterogeneity = log.heterogeneity;
  s.radius = log.radius;

  const auto dist = distance_series(log);
  s.final_distance = dist.back();
  for (std::size_t t = 0; t < dist.size(); ++t)
    if (dist[t] <= log.radius) {
      s.region_entry_round = t;
      break;
    }
  if (s.region_entry_round) {
    const auto entry = *s.region_entry_round;
    s.min_distance_after_entry = dist[entry];
    std::size_t inside = 0, total = 0;
    for (std::size_t t = entry + 1; t < dist.size(); ++t, ++total) {
      inside += dist[t] <= log.radius ? 1 : 0;
      s.min_distance_after_entry = std::min(s.min_distance_after_entry, dist[t]);
    }
    s.dwell_fraction = total > 0 ? static_cast<double>(inside) / static_cast<double>(total) : 1.0;
  }

  const ModelVector& x_final = log.rounds.empty() ? log.x0 : log.rounds.back().x_next;
  s.final_objective = global_objective(pop, x_final);

  double sigma_sum = 0.0;
  std::size_t sigma_count = 0;
  std::vector<double> offsets;
  for (const auto& r : log.rounds) {
    if (r.residual) {
      ++s.identity_rounds;
      s.max_residual = std::max(s.max_residual, *r.residual);
      if (!(*r.residual <= tolerance)) ++s.identity_failures;
    }
    for (const auto& c : r.clients) {
      sigma_sum += c.sigma;
      ++sigma_count;
    }
    offsets.push_back((r.diagnostics.weighted_center - log.center).norm());
  }
  if (sigma_count > 0) s.mean_sigma = sigma_sum / static_cast<double>(sigma_count);
  if (offsets.size() >= 2) {
    double mean = 0.0;
    for (double v : offsets) mean += v;
    mean /= static_cast<double>(offsets.size());
    double var = 0.0;
    for (double v : offsets) var += (v - mean) * (v - mean);
    s.center_offset_variance = var / static_cast<double>(offsets.size() - 1);
  }
  return s;
}

std::vector<double> distance_series(const TrajectoryLog& log) {
  std::vector<double> out;
  out.reserve(log.rounds.size() + 1);
  out.push_back((log.x0 - log.center).norm());
  for (const auto& r : log.rounds) out.push_back(r.distance_next);
  return out;
}

std::string summary_to_json(const ExperimentSummary& s) {
  Json j;
  j["rounds"] = s.rounds;
  j["status"] = s.status;
  j["final_distance"] = s.final_distance;
  j["region_entry_round"] = s.region_entry_round ? Json(*s.region_entry_round) : Json(nullptr);
  j["min_distance_after_entry"] = s.region_entry_round ? Json(s.min_distance_after_entry) : Json(nullptr);
  j["dwell_fraction"] = s.dwell_fraction;
  j["max_identity_residual"] = s.max_residual;
  j["identity_rounds"] = s.identity_rounds;
  j["identity_failures"] = s.identity_failures;
  j["final_objective"] = s.final_objective;
  j["heterogeneity"] = s.heterogeneity;
  j["region_radius"] = s.radius;
  j["mean_sigma"] = s.mean_sigma;
  j["center_offset_variance"] = s.center_offset_variance;
  return j.dump(2);
}

ExperimentSummary run_to_directory(const ExperimentConfig& cfg, const ClientPopulation& pop,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream log_file(dir / cfg.output.log_name);
  if (!log_file) throw std::runtime_error("cannot write '" + (dir / cfg.output.log_name).string() + "'");
  ExperimentSink sink;
  sink.log = &log_file;
  if (cfg.diagnostics.dump_A) {
    sink.matrix_dir = dir / "A";
    std::filesystem::create_directories(sink.matrix_dir);
  }

  const auto write_summary = [&](const ExperimentSummary& s) {
    std::ofstream out(dir / cfg.output.summary_name);
    out << summary_to_json(s) << '\n';
  };

  TrajectoryLog log;
  try {
    log = run_experiment(cfg, pop, sink);
  } catch (const DivergenceError& e) {
    ExperimentSummary s;
    s.status = std::string("diverged: ") + e.what();
    write_summary(s);
    throw;
  }
  const auto summary = summarize(log, pop, cfg.diagnostics.tolerance);
  write_summary(summary);

  if (!cfg.output.trajectory_csv.empty()) {
    const auto basis = make_basis(pop.dim(), derive_seed(cfg.seed, 17));
    std::vector<TrajectoryPoint> points;
    const auto dist = distance_series(log);
    points.push_back({0, relative_position(log.x0, basis), dist[0], dist[0] <= log.radius});
    for (std::size_t t = 0; t < log.rounds.size(); ++t)
      points.push_back({t + 1, relative_position(log.rounds[t].x_next, basis), dist[t + 1],
                        dist[t + 1] <= log.radius});
    std::ofstream csv(dir / cfg.output.trajectory_csv);
    write_trajectory_csv(csv, points);
  }
  return summary;
}

}  // namespace fedtheory
