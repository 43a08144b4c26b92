#include "fedtheory/errors.hpp"
#include "fedtheory/local_solver.hpp"
#include "fedtheory/objectives.hpp"
#include "fedtheory/random.hpp"
#include "fedtheory/server.hpp"
#include "fedtheory/theory.hpp"
#include "fedtheory/verification.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace fedtheory;
using testing::record;
using testing::vec;

namespace {

const ModelVector kX = vec({0, 0});

std::vector<ClientRoundRecord> two_exact() {
  return {record(0.5, vec({1, 2}), vec({0, 0}), kX), record(0.5, vec({-1, 2}), vec({0, 0}), kX)};
}

struct RoundFixture {
  ModelVector x;
  std::vector<ObjectivePtr> clients;
  std::vector<double> weights;
};

RoundFixture random_round(Rng& rng, std::size_t n, Eigen::Index d) {
  RoundFixture f;
  f.x = random_gaussian(rng, d, 3.0);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    f.clients.push_back(std::make_shared<QuadraticObjective>(random_gaussian(rng, d), random_spd(rng, d, 0.2, 2.0)));
    f.weights.push_back(u(rng));
    total += f.weights.back();
  }
  for (auto& w : f.weights) w /= total;
  return f;
}

}  // namespace

TEST_CASE("matrix A examples") {
  const auto recs = two_exact();
  const auto a = compute_A(recs);
  CHECK(a(0, 0) == doctest::Approx(1.0));
  CHECK(a(0, 1) == doctest::Approx(0.6));
  CHECK(a(1, 0) == doctest::Approx(0.6));
  const std::vector single{record(1.0, vec({3, 1}), vec({0, 0}), kX)};
  CHECK(compute_A(single)(0, 0) == 1.0);
  const std::vector same{record(0.5, vec({1, 1}), vec({0, 0}), kX), record(0.5, vec({2, 2}), vec({0, 0}), kX)};
  CHECK((compute_A(same) - Matrix::Ones(2, 2)).norm() < 1e-12);
}

TEST_CASE("matrix A diagonal and symmetry") {
  Rng rng(mix_seed(4));
  std::vector<ClientRoundRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(record(0.2, random_gaussian(rng, 3), random_gaussian(rng, 3, 0.5), kX));
  const auto a = compute_A(recs);
  for (Eigen::Index i = 0; i < 5; ++i)
    CHECK(a(i, i) == doctest::Approx(1.0 - recs[static_cast<std::size_t>(i)].sigma * recs[static_cast<std::size_t>(i)].sigma).epsilon(1e-12));
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("descent examples") {
  CHECK(compute_descent(two_exact()) == doctest::Approx(4.0));
  const std::vector stalled{record(0.5, vec({1, 2}), vec({1, 2}), kX), record(0.5, vec({-1, 2}), vec({-1, 2}), kX)};
  CHECK(std::abs(compute_descent(stalled)) < 1e-12);
  const std::vector single{record(1.0, vec({3, 4}), vec({0, 0}), kX)};
  CHECK(compute_descent(single) == doctest::Approx(25.0));
}

TEST_CASE("weighted center and cosines") {
  const auto recs = two_exact();
  CHECK((weighted_center(recs) - vec({0, -2})).norm() < 1e-15);
  CHECK(mean_pairwise_cosine(recs) == doctest::Approx(0.6));
  const std::vector orth{record(0.5, vec({1, 0}), vec({0, 0}), kX), record(0.5, vec({0, 1}), vec({0, 0}), kX)};
  CHECK(std::abs(mean_pairwise_cosine(orth)) < 1e-15);
  const std::vector same{record(0.5, vec({1, 1}), vec({0, 0}), kX), record(0.5, vec({2, 2}), vec({0, 0}), kX)};
  CHECK(mean_pairwise_cosine(same) == doctest::Approx(1.0));
  CHECK_THROWS(mean_pairwise_cosine(std::vector{record(1.0, vec({1, 0}), vec({0, 0}), kX)}));
}

TEST_CASE("region radius") {
  CHECK(region_radius(std::vector{vec({0, 0}), vec({2, 0})}) == doctest::Approx(1.0));
  CHECK(region_radius(std::vector{vec({0, 0}), vec({2, 0}), vec({1, std::sqrt(3.0)})}) == doctest::Approx(1.0));
  CHECK(region_radius(std::vector{vec({1, 1}), vec({1, 1}), vec({1, 1})}) == 0.0);
  CHECK_THROWS_AS(region_radius(std::vector{vec({1, 1})}), UndefinedQuantity);
}

TEST_CASE("boundary cosine on the diameter circle") {
  const auto a = vec({0, 0}), b = vec({2, 0});
  CHECK(std::abs(boundary_cosine_check(vec({1, 1}), a, b)) < 1e-12);
  CHECK(boundary_cosine_check(vec({1, 2}), a, b) == doctest::Approx(0.6));
  CHECK(boundary_cosine_check(vec({1, 0.5}), a, b) < 0.0);
  for (double theta = 0.1; theta < 3.0; theta += 0.37)
    CHECK(std::abs(boundary_cosine_check(vec({1 + std::cos(theta), std::sin(theta)}), a, b)) < 1e-9);
}

TEST_CASE("single-round identity for plain averaging") {
  SUBCASE("exact solves") {
    const auto recs = two_exact();
    const auto check = verify_theorem2(kX, weighted_center(recs), recs);
    CHECK(check.observed == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(check.holds(1e-12));
  }
  SUBCASE("random quadratics, gd K = 3, including overshooting steps") {
    Rng rng(mix_seed(12));
    for (int t = 0; t < 200; ++t) {
      const auto f = random_round(rng, 1 + t % 6, 1 + t % 5);
      const double lr = t % 4 == 0 ? 1.9 / 2.0 : 0.3;
      std::vector<LocalRunResult> runs;
      std::vector<ClientRoundRecord> recs;
      for (std::size_t i = 0; i < f.clients.size(); ++i) {
        runs.push_back(run_local(*f.clients[i], f.x, {.method = LocalMethod::gd, .steps = 3, .local_lr = lr}));
        recs.push_back(make_record(i, f.weights[i], f.clients[i]->optimum(), runs.back()));
      }
      const auto next = step_fedavg(ServerState::initial(f.x), aggregate(runs, f.weights, f.x)).x;
      const auto check = verify_theorem2(f.x, next, recs);
      CHECK(check.relative() <= 1e-9);
      CHECK(check.descent_prefactored == doctest::Approx(check.descent / static_cast<double>(recs.size() * recs.size())));
    }
  }
}

TEST_CASE("drift-correction identity") {
  Rng rng(mix_seed(13));
  for (int t = 0; t < 200; ++t) {
    const auto f = random_round(rng, 2 + t % 5, 2 + t % 3);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    const double eta = u(rng);
    std::vector<LocalRunResult> runs;
    std::vector<ClientRoundRecord> recs;
    for (std::size_t i = 0; i < f.clients.size(); ++i) {
      const auto h = random_gaussian(rng, f.x.size(), 0.5);
      runs.push_back(run_local(*f.clients[i], f.x, {.method = LocalMethod::gd, .steps = 4, .local_lr = 0.2}, h));
      recs.push_back(make_record(i, f.weights[i], f.clients[i]->optimum(), runs.back()));
    }
    const auto g = aggregate(runs, f.weights, f.x);
    const auto next = step_dc(ServerState::initial(f.x), g, eta).x;
    CHECK(verify_theorem3(f.x, next, recs, g.correction, eta).relative() <= 1e-9);
  }
}

TEST_CASE("drift-correction reductions") {
  const auto recs = two_exact();
  const ModelVector zero = vec({0, 0});
  SUBCASE("no correction and unit rate reduce to plain averaging") {
    const auto dc = verify_theorem3(kX, weighted_center(recs), recs, zero, 1.0);
    CHECK(dc.wp == doctest::Approx(0.0));
    CHECK(dc.holds(1e-12));
  }
  SUBCASE("zero rate predicts the starting distance") {
    const auto dc = verify_theorem3(kX, kX, recs, zero, 0.0);
    CHECK(dc.predicted == doctest::Approx((kX - weighted_center(recs)).squaredNorm()));
    CHECK(dc.holds(1e-12));
  }
  SUBCASE("oracle correction is effective and shortens the step") {
    Rng rng(mix_seed(21));
    const auto f = random_round(rng, 4, 3);
    std::vector<LocalRunResult> runs, plain;
    std::vector<ClientRoundRecord> r;
    ModelVector center = ModelVector::Zero(3);
    for (std::size_t i = 0; i < 4; ++i) center += f.weights[i] * f.clients[i]->optimum();
    const double lr = 0.2;
    const std::size_t k = 3;
    for (std::size_t i = 0; i < 4; ++i) {
      const ModelVector h = 0.1 * (center - f.x) / (lr * static_cast<double>(k));
      runs.push_back(run_local(*f.clients[i], f.x, {.method = LocalMethod::gd, .steps = k, .local_lr = lr}, h));
      r.push_back(make_record(i, f.weights[i], f.clients[i]->optimum(), runs.back()));
    }
    const auto g = aggregate(runs, f.weights, f.x);
    CHECK((g.correction - 0.1 * (center - f.x)).norm() < 1e-12);
    const auto next = step_dc(ServerState::initial(f.x), g, 1.0).x;
    const auto dc = verify_theorem3(f.x, next, r, g.correction, 1.0);
    CHECK(dc.holds());
    CHECK(dc.effective);
    PseudoGradient without = g;
    without.correction.setZero();
    const auto counterfactual = step_dc(ServerState::initial(f.x), without, 1.0).x;
    CHECK((next - center).squaredNorm() < (counterfactual - center).squaredNorm());
  }
}

TEST_CASE("momentum identity in scalar adaptive mode") {
  Rng rng(mix_seed(14));
  for (int t = 0; t < 200; ++t) {
    const auto f = random_round(rng, 2 + t % 4, 2 + t % 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<LocalRunResult> runs;
    std::vector<ClientRoundRecord> recs;
    for (std::size_t i = 0; i < f.clients.size(); ++i) {
      runs.push_back(run_local(*f.clients[i], f.x, {.method = LocalMethod::gd, .steps = 2, .local_lr = 0.3}));
      recs.push_back(make_record(i, f.weights[i], f.clients[i]->optimum(), runs.back()));
    }
    auto state = ServerState::initial(f.x);
    state.d_prev = random_gaussian(rng, f.x.size());
    state.v_prev = random_gaussian(rng, f.x.size()).cwiseAbs2();
    const ServerHyper h{.global_lr = 0.2 + u(rng), .nu = u(rng), .beta = u(rng), .beta2 = 0.99,
                        .adaptive = AdaptiveMode::scalar};
    SAStepInfo info;
    const auto next = step_sa(state, aggregate(runs, f.weights, f.x), h, &info).x;
    const auto sa = verify_theorem4(f.x, next, recs, state.d_prev, info.eta_phi, h.nu, h.beta);
    CHECK(sa.relative() <= 1e-9);
  }
}

TEST_CASE("momentum diagnostics reductions") {
  const auto recs = two_exact();
  const auto sa = verify_theorem4(kX, weighted_center(recs), recs, vec({0, 0}), 1.0, 0.0, 0.5);
  CHECK(sa.eta_hat == 1.0);
  CHECK(sa.eta_mom == 0.0);
  CHECK(sa.holds(1e-12));
  const auto shb = verify_theorem4(kX, kX, recs, vec({1, 1}), 0.4, 0.7, 0.9);
  CHECK(shb.eta_hat == doctest::Approx(0.4 * (1 - 0.63)));
  CHECK(shb.eta_mom == doctest::Approx(-0.4 * 0.63));
}

TEST_CASE("diagnose round") {
  const auto recs = two_exact();
  const std::vector optima{recs[0].optimum, recs[1].optimum};
  const auto d = diagnose_round(kX, recs, optima);
  CHECK(d.descent == doctest::Approx(4.0));
  CHECK(d.descent_prefactored == doctest::Approx(1.0));
  REQUIRE(d.mean_pairwise_cos);
  CHECK(*d.mean_pairwise_cos == doctest::Approx(0.6));
  CHECK(d.region_radius == doctest::Approx(1.0));
  CHECK(d.distance_to_center == doctest::Approx(2.0));
  CHECK_FALSE(d.in_region);
}
