#pragma once

#include "fedtheory/objectives.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace fedtheory {

struct ProjectionBasis {
  ModelVector w_x;
  ModelVector w_y;
  std::uint64_t seed = 0;
};

/// Two independent N(0, scale^2 I) base models shared by a whole study.
ProjectionBasis make_basis(Eigen::Index dim, std::uint64_t seed, double scale = 1.0);

enum class ProjectionMode {
  normalized,  // <W, W_x> / ||W_x||^2, signed
  literal,     // ||W cos<W, W_x>|| / ||W_x||, i.e. the absolute value of the above
};

/// Coordinates restricted to parameters [offset, offset + length).
struct ParameterRange {
  Eigen::Index offset = 0;
  Eigen::Index length = 0;
};

struct PlanePoint {
  double x = 0.0;
  double y = 0.0;
};

PlanePoint relative_position(const ModelVector& model, const ProjectionBasis& basis,
                             ProjectionMode mode = ProjectionMode::normalized,
                             std::optional<ParameterRange> range = std::nullopt);

/// Inclusive lattice: x_k = x_min + (x_max - x_min) * (k / nx), k = 0..nx.
struct GridSpec {
  double x_min = -1.0;
  double x_max = 1.0;
  double y_min = -1.0;
  double y_max = 1.0;
  std::size_t nx = 20;
  std::size_t ny = 20;

  double x_at(std::size_t k) const;
  double y_at(std::size_t k) const;
};

/// f(anchor + (s - anchor.x) W_x + (b - anchor.y) W_y), rows indexed by y.
Matrix landscape_grid(const Objective& obj, const ModelVector& anchor,
                      const ProjectionBasis& basis, PlanePoint anchor_coords,
                      const GridSpec& grid, unsigned threads = 1);

/// Pointwise minimum of the client landscapes, each anchored at its optimum.
Matrix gathered_landscape(const ClientPopulation& pop, const ProjectionBasis& basis,
                          const GridSpec& grid,
                          ProjectionMode mode = ProjectionMode::normalized,
                          unsigned threads = 1);

void write_grid_csv(std::ostream& out, const Matrix& values, const GridSpec& grid);

struct TrajectoryPoint {
  std::size_t round = 0;
  PlanePoint position;
  double distance = 0.0;
  bool in_region = false;
};

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryPoint>& points);

}  // namespace fedtheory
