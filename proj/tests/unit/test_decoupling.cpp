#include "fedtheory/decoupling.hpp"
#include "fedtheory/errors.hpp"
#include "fedtheory/random.hpp"
#include "fedtheory/verification.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace fedtheory;
using testing::record;
using testing::vec;

TEST_CASE("point mass is exact with averaged selectors") {
  const std::vector fixed{vec({1, 2, -1}), vec({0.5, -3, 2})};
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  const auto r = decoupling_check(a, [&](Rng&) { return fixed; }, 1, 0, SelectorMode::averaged);
  const double expected = 2.0 * fixed[0].dot(fixed[1]);
  CHECK(std::abs(r.mc_lhs - expected) <= 1e-12);
  CHECK(std::abs(r.mc_rhs - expected) <= 1e-12);
}

TEST_CASE("zero matrix gives zero on both sides") {
  const Matrix a = Matrix::Zero(3, 3);
  const auto r = decoupling_check(a, [](Rng& rng) {
    return std::vector{random_gaussian(rng, 2), random_gaussian(rng, 2), random_gaussian(rng, 2)};
  }, 100, 1);
  CHECK(r.mc_lhs == 0.0);
  CHECK(r.mc_rhs == 0.0);
}

TEST_CASE("gaussian family agrees within three standard errors") {
  Rng setup(mix_seed(44));
  Matrix a = Matrix::Zero(5, 5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j)
      if (i != j) a(i, j) = g(setup);
  std::vector<ModelVector> means;
  for (int i = 0; i < 5; ++i) means.push_back(random_gaussian(setup, 3));
  const VectorFamilySampler sample = [&](Rng& rng) {
    std::vector<ModelVector> x;
    for (const auto& m : means) x.push_back(m + random_gaussian(rng, 3, 0.8));
    return x;
  };
  for (auto mode : {SelectorMode::sampled, SelectorMode::averaged}) {
    const auto r = decoupling_check(a, sample, 100000, 9, mode);
    CHECK(r.mc_stderr > 0.0);
    CHECK(r.equal_within(3.0));
  }
}

TEST_CASE("decoupling input validation") {
  const auto sampler = [](Rng&) { return std::vector{vec({1}), vec({2})}; };
  CHECK_THROWS_AS(decoupling_check(Matrix::Zero(2, 2), sampler, 0, 0), InputError);
  CHECK_THROWS_AS(decoupling_check(Matrix::Identity(2, 2), sampler, 10, 0), InputError);
  CHECK_THROWS_AS(decoupling_check(Matrix::Zero(3, 3), sampler, 10, 0), InputError);
}

TEST_CASE("uniform in ball stays inside and has the right second moment") {
  Rng rng(mix_seed(3));
  double sum = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const auto u = uniform_in_ball(rng, 3, 2.0);
    CHECK(u.norm() <= 2.0);
    sum += u.squaredNorm();
  }
  // E||u||^2 = r^2 d / (d + 2)
  CHECK(sum / n == doctest::Approx(4.0 * 3.0 / 5.0).epsilon(0.02));
}

TEST_CASE("single client reduction of the expected descent") {
  const ModelVector x = vec({0, 0, 0});
  const std::vector recs{record(1.0, vec({1, 2, 2}), vec({0, 0, 0}), x)};
  const auto r = expected_descent_bounds(recs, 50000, 4);
  // (1 - E sigma^2) ||delta||^2 with E sigma^2 = d / (d + 2)
  CHECK(r.analytic == doctest::Approx(9.0 * 2.0 / 5.0));
  CHECK(std::abs(r.mc_lhs - r.analytic) <= 4.0 * r.mc_stderr);
  CHECK(r.contained(3.0));
}

TEST_CASE("identical deltas give min cosine one and contained bounds") {
  const ModelVector x = vec({0, 0});
  const std::vector recs{record(0.5, vec({1, 1}), vec({0, 0}), x), record(0.5, vec({1, 1}), vec({0, 0}), x)};
  const auto r = expected_descent_bounds(recs, 50000, 8);
  CHECK(r.min_cos == doctest::Approx(1.0));
  CHECK(r.applicable);
  CHECK(r.lower_bound <= r.upper_bound);
  CHECK(r.contained(3.0));
}

TEST_CASE("negative cosine makes the bounds inapplicable") {
  const ModelVector x = vec({0, 0});
  const std::vector recs{record(0.5, vec({1, 0}), vec({0, 0}), x), record(0.5, vec({-1, 0.2}), vec({0, 0}), x)};
  const auto r = expected_descent_bounds(recs, 100, 1);
  CHECK_FALSE(r.applicable);
  CHECK_FALSE(r.contained());
}

TEST_CASE("bounds are ordered whenever cosines are positive") {
  Rng rng(mix_seed(17));
  for (int t = 0; t < 50; ++t) {
    const ModelVector x = vec({0, 0, 0});
    const ModelVector dir = random_gaussian(rng, 3);
    std::vector<ClientRoundRecord> recs;
    for (int i = 0; i < 4; ++i) recs.push_back(record(0.25, 3.0 * dir + random_gaussian(rng, 3, 0.3), vec({0, 0, 0}), x));
    const auto r = expected_descent_bounds(recs, 2000, static_cast<std::uint64_t>(t));
    if (r.applicable) CHECK(r.lower_bound <= r.upper_bound);
  }
}
