#include "fedtheory/errors.hpp"
#include "fedtheory/local_solver.hpp"
#include "fedtheory/objectives.hpp"
#include "fedtheory/server.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <memory>
#include <numeric>

using namespace fedtheory;
using testing::vec;

namespace {

ClientPopulation line_population(std::size_t n) {
  std::vector<ObjectivePtr> clients;
  for (std::size_t i = 0; i < n; ++i)
    clients.push_back(std::make_shared<QuadraticObjective>(
        QuadraticObjective::isotropic(vec({static_cast<double>(i), 0.0}))));
  return ClientPopulation(std::move(clients));
}

LocalRunResult exact(const Objective& obj, const ModelVector& x) {
  return run_local(obj, x, {.method = LocalMethod::exact_solve});
}

}  // namespace

TEST_CASE("mode all keeps every client and the population weights") {
  const auto base = line_population(3);
  const ClientPopulation pop(base.clients, {0.5, 0.3, 0.2});
  const auto s = sample_round(pop, {.mode = ParticipationMode::all}, 4);
  CHECK(s.clients == std::vector<std::size_t>{0, 1, 2});
  CHECK(s.weights == std::vector<double>{0.5, 0.3, 0.2});
}

TEST_CASE("fractional sampling is exact in size and reproducible") {
  const auto pop = line_population(10);
  const ParticipationPolicy p{.mode = ParticipationMode::uniform_fraction, .fraction = 0.5, .seed = 11};
  const auto a = sample_round(pop, p, 3);
  const auto b = sample_round(pop, p, 3);
  CHECK(a.clients.size() == 5);
  CHECK(a.clients == b.clients);
  CHECK(std::is_sorted(a.clients.begin(), a.clients.end()));
  for (double w : a.weights) CHECK(w == doctest::Approx(0.2));
  bool differs = false;
  for (std::size_t t = 4; t < 20 && !differs; ++t) differs = sample_round(pop, p, t).clients != a.clients;
  CHECK(differs);
}

TEST_CASE("renormalized weights sum to one") {
  const auto base = line_population(6);
  const ClientPopulation pop(base.clients, {0.05, 0.1, 0.15, 0.2, 0.2, 0.3});
  const auto s = sample_round(pop, {.mode = ParticipationMode::uniform_fraction, .fraction = 0.5, .seed = 3}, 0);
  CHECK(std::accumulate(s.weights.begin(), s.weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a fraction that selects nobody is a config error") {
  const auto pop = line_population(10);
  CHECK_THROWS_AS(sample_round(pop, {.mode = ParticipationMode::uniform_fraction, .fraction = 0.01}, 0),
                  ConfigError);
}

TEST_CASE("aggregate with exact solves") {
  const auto pop = line_population(2);
  const auto x = vec({3, 4});
  const std::vector one{exact(*pop.clients[0], x)};
  CHECK((aggregate(one, std::vector{1.0}, x).value - (x - vec({0, 0}))).norm() < 1e-15);
  const std::vector two{exact(*pop.clients[0], x), exact(*pop.clients[1], x)};
  const auto g = aggregate(two, std::vector{0.5, 0.5}, x);
  CHECK((g.value - (x - vec({0.5, 0}))).norm() < 1e-15);
  CHECK(g.correction.norm() == 0.0);
  CHECK_THROWS(aggregate(two, std::vector{1.0}, x));
}

TEST_CASE("fedavg and dc steps") {
  const auto state = ServerState::initial(vec({3, 4}));
  PseudoGradient g;
  g.value = vec({3, 3.5});
  g.correction = vec({0, 0});
  CHECK((step_fedavg(state, g).x - vec({0, 0.5})).norm() < 1e-15);
  CHECK(step_fedavg(state, g).round == 1);
  CHECK(step_dc(state, g, 1.0).x == step_fedavg(state, g).x);
  CHECK(step_dc(state, g, 0.0).x == state.x);
  g.correction = g.value;
  CHECK(step_dc(state, g, 0.7).x == state.x);
  PseudoGradient zero{vec({0, 0}), vec({0, 0}), {}, {}};
  CHECK(step_fedavg(state, zero).x == state.x);
}

TEST_CASE("qhm step reductions") {
  auto state = ServerState::initial(vec({1, -2}));
  state.d_prev = vec({0.4, 0.1});
  PseudoGradient g{vec({0.5, -1.5}), vec({0, 0}), {}, {}};

  SUBCASE("nu = beta = 0 with unit rate is bitwise fedavg") {
    const auto fresh = ServerState::initial(vec({1, -2}));
    CHECK(step_sa(fresh, g, {.global_lr = 1.0}).x == step_fedavg(fresh, g).x);
  }
  SUBCASE("nu = 0 ignores momentum in the step") {
    const auto next = step_sa(state, g, {.global_lr = 0.3, .nu = 0.0, .beta = 0.8});
    CHECK((next.x - (state.x - 0.3 * g.value)).norm() < 1e-15);
    CHECK((next.d_prev - (0.2 * g.value + 0.8 * state.d_prev)).norm() < 1e-15);
  }
  SUBCASE("beta = 0 steps along G whatever nu is") {
    const auto next = step_sa(state, g, {.global_lr = 0.3, .nu = 0.6, .beta = 0.0});
    CHECK((next.x - (state.x - 0.3 * g.value)).norm() < 1e-15);
  }
  SUBCASE("nu = 1 is heavy ball on the normalized buffer") {
    const auto next = step_sa(state, g, {.global_lr = 0.3, .nu = 1.0, .beta = 0.9});
    const ModelVector d = 0.1 * g.value + 0.9 * state.d_prev;
    CHECK((next.x - (state.x - 0.3 * d)).norm() < 1e-15);
  }
  SUBCASE("scalar adaptive mode divides by one number") {
    SAStepInfo info;
    const ServerHyper h{.global_lr = 0.5, .nu = 0.7, .beta = 0.9, .beta2 = 0.99, .adaptive = AdaptiveMode::scalar};
    const auto next = step_sa(state, g, h, &info);
    CHECK(info.phi > 0.0);
    CHECK(info.eta_phi == doctest::Approx(0.5 / info.phi));
    const ModelVector direction = 0.3 * g.value + 0.7 * info.d;
    CHECK((next.x - (state.x - info.eta_phi * direction)).norm() < 1e-14);
  }
  SUBCASE("zero pseudo-gradient stays finite with the floor") {
    PseudoGradient zero{vec({0, 0}), vec({0, 0}), {}, {}};
    const auto fresh = ServerState::initial(vec({1, 1}));
    const auto next = step_sa(fresh, zero, {.global_lr = 1.0, .nu = 0.5, .beta = 0.5, .adaptive = AdaptiveMode::elementwise});
    CHECK(next.x.allFinite());
    CHECK(next.x == fresh.x);
  }
}
