#include "fedtheory/errors.hpp"
#include "fedtheory/objectives.hpp"
#include "fedtheory/projection.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <memory>
#include <sstream>

using namespace fedtheory;
using testing::vec;

TEST_CASE("basis is seeded and nonzero") {
  const auto a = make_basis(6, 3);
  const auto b = make_basis(6, 3);
  CHECK(a.w_x == b.w_x);
  CHECK(a.w_y == b.w_y);
  CHECK(a.w_x.norm() > 0.0);
  CHECK(make_basis(6, 4).w_x != a.w_x);
}

TEST_CASE("relative position examples") {
  const auto basis = make_basis(4, 9);
  const auto self = relative_position(basis.w_x, basis);
  CHECK(self.x == doctest::Approx(1.0));
  const auto twice = relative_position(2.0 * basis.w_x, basis);
  CHECK(twice.x == doctest::Approx(2.0));
  // Remove the W_x component to get an orthogonal model.
  const ModelVector w = basis.w_y - basis.w_y.dot(basis.w_x) / basis.w_x.squaredNorm() * basis.w_x;
  CHECK(std::abs(relative_position(w, basis).x) < 1e-12);
  const auto zero = relative_position(ModelVector::Zero(4), basis);
  CHECK(zero.x == 0.0);
  CHECK(zero.y == 0.0);
}

TEST_CASE("normalized mode is signed and homogeneous, literal mode is its magnitude") {
  const auto basis = make_basis(5, 1);
  const ModelVector m = vec({0.3, -1.2, 2.0, 0.1, -0.4});
  const auto p = relative_position(m, basis);
  const auto q = relative_position(3.5 * m, basis);
  CHECK(q.x == doctest::Approx(3.5 * p.x));
  CHECK(q.y == doctest::Approx(3.5 * p.y));
  const auto neg = relative_position(-m, basis);
  CHECK(neg.x == doctest::Approx(-p.x));
  const auto lit = relative_position(-m, basis, ProjectionMode::literal);
  CHECK(lit.x == doctest::Approx(std::abs(p.x)));
  CHECK(lit.y == doctest::Approx(std::abs(p.y)));
}

TEST_CASE("parameter range projects a sub-block") {
  const auto basis = make_basis(6, 2);
  ModelVector m = ModelVector::Zero(6);
  m.segment(2, 3) = basis.w_x.segment(2, 3);
  const auto p = relative_position(m, basis, ProjectionMode::normalized, ParameterRange{2, 3});
  CHECK(p.x == doctest::Approx(1.0));
  CHECK_THROWS_AS(relative_position(m, basis, ProjectionMode::normalized, ParameterRange{4, 3}), InputError);
}

TEST_CASE("landscape grid at the anchor equals the anchor value") {
  const QuadraticObjective q(vec({1, -1, 0.5}), Matrix::Identity(3, 3) * 2.0, 0.3);
  const auto basis = make_basis(3, 5);
  const ModelVector anchor = vec({0.2, 0.4, -0.6});
  const PlanePoint at{0.25, -0.5};
  const GridSpec grid{.x_min = -1, .x_max = 1, .y_min = -1, .y_max = 1, .nx = 8, .ny = 8};
  const auto g = landscape_grid(q, anchor, basis, at, grid);
  CHECK(g.rows() == 9);
  CHECK(g.cols() == 9);
  // (0.25, -0.5) is the lattice point (5, 2).
  CHECK(g(2, 5) == q.evaluate(anchor));
}

TEST_CASE("quadratic landscape is a quadratic surface") {
  Matrix qm(3, 3);
  qm << 3, 1, 0, 1, 2, 0.5, 0, 0.5, 1;
  const QuadraticObjective q(vec({1, 2, 3}), qm);
  const auto basis = make_basis(3, 6);
  const GridSpec grid{.x_min = -2, .x_max = 2, .y_min = -1, .y_max = 3, .nx = 10, .ny = 10};
  const auto g = landscape_grid(q, vec({0, 0, 0}), basis, {0.0, 0.0}, grid);
  Matrix design(121, 6);
  ModelVector target(121);
  Eigen::Index k = 0;
  for (std::size_t r = 0; r <= 10; ++r)
    for (std::size_t c = 0; c <= 10; ++c, ++k) {
      const double s = grid.x_at(c), b = grid.y_at(r);
      design.row(k) << 1, s, b, s * s, s * b, b * b;
      target(k) = g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  const ModelVector coef = design.colPivHouseholderQr().solve(target);
  CHECK((design * coef - target).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, target.cwiseAbs().maxCoeff()));
}

TEST_CASE("refining the grid keeps coincident values") {
  const QuadraticObjective q(vec({1, 0}), Matrix::Identity(2, 2));
  const auto basis = make_basis(2, 8);
  const GridSpec coarse{.x_min = -1, .x_max = 1, .y_min = -1, .y_max = 1, .nx = 4, .ny = 4};
  GridSpec fine = coarse;
  fine.nx = fine.ny = 8;
  const auto a = landscape_grid(q, vec({0.1, 0.2}), basis, {0, 0}, coarse);
  const auto b = landscape_grid(q, vec({0.1, 0.2}), basis, {0, 0}, fine);
  for (Eigen::Index r = 0; r <= 4; ++r)
    for (Eigen::Index c = 0; c <= 4; ++c) CHECK(a(r, c) == b(2 * r, 2 * c));
}

TEST_CASE("gathered landscape") {
  const auto basis = make_basis(2, 21);
  const GridSpec grid{.x_min = -3, .x_max = 3, .y_min = -3, .y_max = 3, .nx = 60, .ny = 60};
  const auto q1 = std::make_shared<QuadraticObjective>(QuadraticObjective::isotropic(vec({1.5, 0.5})));
  const auto q2 = std::make_shared<QuadraticObjective>(QuadraticObjective::isotropic(vec({-1.0, -1.5})));

  const ClientPopulation single({q1});
  const auto own = landscape_grid(*q1, q1->optimum(), basis, relative_position(q1->optimum(), basis), grid);
  CHECK(gathered_landscape(single, basis, grid) == own);

  const ClientPopulation pair({q1, q2});
  const auto g = gathered_landscape(pair, basis, grid);
  const auto g1 = landscape_grid(*q1, q1->optimum(), basis, relative_position(q1->optimum(), basis), grid);
  const auto g2 = landscape_grid(*q2, q2->optimum(), basis, relative_position(q2->optimum(), basis), grid);
  CHECK((g.array() <= g1.array()).all());
  CHECK((g.array() <= g2.array()).all());
  CHECK(g == g1.cwiseMin(g2));

  // Each basin minimum sits within one cell of the projected optimum.
  const double cell = 6.0 / 60.0;
  for (const auto& q : {q1, q2}) {
    const auto p = relative_position(q->optimum(), basis);
    Eigen::Index br = 0, bc = 0;
    double best = 1e300;
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index c = 0; c < g.cols(); ++c) {
        const double dx = grid.x_at(static_cast<std::size_t>(c)) - p.x, dy = grid.y_at(static_cast<std::size_t>(r)) - p.y;
        if (dx * dx + dy * dy > 0.25) continue;  // search the basin around this optimum
        if (g(r, c) < best) best = g(r, c), br = r, bc = c;
      }
    CHECK(std::abs(grid.x_at(static_cast<std::size_t>(bc)) - p.x) <= cell);
    CHECK(std::abs(grid.y_at(static_cast<std::size_t>(br)) - p.y) <= cell);
  }
}

TEST_CASE("csv writers") {
  const GridSpec grid{.x_min = 0, .x_max = 1, .y_min = 0, .y_max = 2, .nx = 1, .ny = 2};
  std::ostringstream out;
  write_grid_csv(out, Matrix::Constant(3, 2, 4.0), grid);
  const auto text = out.str();
  CHECK(text.rfind("# x_min=0", 0) == 0);
  CHECK(text.find("y\\x,0,1\n") != std::string::npos);
  std::ostringstream traj;
  write_trajectory_csv(traj, {{0, {1.0, 2.0}, 3.0, false}, {1, {0.5, 0.5}, 0.2, true}});
  CHECK(traj.str().rfind("t,x,y,distance,in_region\n", 0) == 0);
}
