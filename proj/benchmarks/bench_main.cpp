#include "fedtheory/config.hpp"
#include "fedtheory/decoupling.hpp"
#include "fedtheory/experiment.hpp"
#include "fedtheory/local_solver.hpp"
#include "fedtheory/objectives.hpp"
#include "fedtheory/partition.hpp"
#include "fedtheory/population_io.hpp"
#include "fedtheory/projection.hpp"
#include "fedtheory/random.hpp"
#include "fedtheory/server.hpp"
#include "fedtheory/theory.hpp"
#include "fedtheory/verification.hpp"

#include <benchmark/benchmark.h>

#include <memory>

using namespace fedtheory;

namespace {

struct Round {
  ModelVector x;
  std::vector<ClientRoundRecord> records;
  ModelVector x_next;
};

Round make_round(std::size_t clients, Eigen::Index dim) {
  Rng rng(mix_seed(clients * 131 + static_cast<std::size_t>(dim)));
  Round r;
  r.x = random_gaussian(rng, dim, 3.0);
  std::vector<LocalRunResult> runs;
  const std::vector<double> weights(clients, 1.0 / static_cast<double>(clients));
  for (std::size_t i = 0; i < clients; ++i) {
    const QuadraticObjective q(random_gaussian(rng, dim), random_spd(rng, dim, 0.2, 2.0));
    runs.push_back(run_local(q, r.x, {.method = LocalMethod::gd, .steps = 3, .local_lr = 0.3}));
    r.records.push_back(make_record(i, weights[i], q.optimum(), runs.back()));
  }
  r.x_next = step_fedavg(ServerState::initial(r.x), aggregate(runs, weights, r.x)).x;
  return r;
}

void BM_ComputeA(benchmark::State& state) {
  const auto r = make_round(static_cast<std::size_t>(state.range(0)), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(compute_A(r.records));
}
BENCHMARK(BM_ComputeA)->Args({10, 10})->Args({20, 50})->Args({100, 50});

void BM_VerifyPlainAveraging(benchmark::State& state) {
  const auto r = make_round(static_cast<std::size_t>(state.range(0)), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(verify_theorem2(r.x, r.x_next, r.records));
}
BENCHMARK(BM_VerifyPlainAveraging)->Args({10, 10})->Args({20, 50});

void BM_LocalGd(benchmark::State& state) {
  Rng rng(mix_seed(1));
  const auto d = state.range(0);
  const QuadraticObjective q(random_gaussian(rng, d), random_spd(rng, d, 0.2, 2.0));
  const auto x = random_gaussian(rng, d, 3.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(run_local(q, x, {.method = LocalMethod::gd, .steps = 10, .local_lr = 0.3}));
}
BENCHMARK(BM_LocalGd)->Arg(2)->Arg(50)->Arg(200);

void BM_LogisticGradient(benchmark::State& state) {
  auto data = std::make_shared<LabeledDataset>(make_synthetic_dataset(10, 100, 5, 3.0, 2));
  const LogisticObjective obj(data, LogisticObjective::Options{});
  const ModelVector x = ModelVector::Constant(obj.dim(), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(obj.gradient(x));
}
BENCHMARK(BM_LogisticGradient);

void BM_DirichletSplit(benchmark::State& state) {
  std::vector<int> labels;
  for (int c = 0; c < 10; ++c)
    for (int i = 0; i < 1000; ++i) labels.push_back(c);
  for (auto _ : state)
    benchmark::DoNotOptimize(split(labels, {.num_clients = static_cast<std::size_t>(state.range(0)), .alpha = 0.1, .seed = 3}));
}
BENCHMARK(BM_DirichletSplit)->Arg(10)->Arg(100);

void BM_GatheredLandscape(benchmark::State& state) {
  const auto pop = make_paraboloid({.num_clients = 20, .dim = 2, .seed = 4});
  const auto basis = make_basis(2, 5);
  const GridSpec grid{.x_min = -3, .x_max = 3, .y_min = -3, .y_max = 3,
                      .nx = static_cast<std::size_t>(state.range(0)), .ny = static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(gathered_landscape(pop, basis, grid));
}
BENCHMARK(BM_GatheredLandscape)->Arg(50)->Arg(200);

void BM_ParaboloidExperiment(benchmark::State& state) {
  auto cfg = parse_config(R"({"rounds": 200, "x0": [12, -9],
      "population": {"generator": "paraboloid", "clients": 20, "dim": 2},
      "solver": {"method": "gd", "steps": 5, "local_lr": 0.05},
      "participation": {"mode": "uniform_fraction", "fraction": 0.2}})");
  const auto pop = build_population(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(cfg, pop));
}
BENCHMARK(BM_ParaboloidExperiment)->Unit(benchmark::kMillisecond);

void BM_DecouplingTrials(benchmark::State& state) {
  Matrix a = Matrix::Ones(5, 5) - Matrix::Identity(5, 5);
  const VectorFamilySampler sample = [](Rng& rng) {
    std::vector<ModelVector> x;
    for (int i = 0; i < 5; ++i) x.push_back(random_gaussian(rng, 3));
    return x;
  };
  for (auto _ : state) benchmark::DoNotOptimize(decoupling_check(a, sample, 10000, 1));
}
BENCHMARK(BM_DecouplingTrials)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
