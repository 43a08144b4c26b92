#include "fedtheory/projection.hpp"

#include "fedtheory/errors.hpp"
#include "fedtheory/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <thread>

namespace fedtheory {

namespace {

double axis_coordinate(const ModelVector& w, const ModelVector& base, ProjectionMode mode) {
  const double base_sq = base.squaredNorm();
  if (base_sq == 0.0) throw InputError("projection basis vector is zero");
  const double v = w.dot(base) / base_sq;
  return mode == ProjectionMode::literal ? std::abs(v) : v;
}

template <typename RowFn>
void for_rows(std::size_t rows, unsigned threads, RowFn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows)));
  if (threads == 1) {
    for (std::size_t r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t r = w; r < rows; r += threads) fn(r);
    });
  for (auto& t : pool) t.join();
}

}  // namespace

ProjectionBasis make_basis(Eigen::Index dim, std::uint64_t seed, double scale) {
  if (dim <= 0) throw InputError("make_basis: dimension must be positive");
  Rng rng(mix_seed(seed));
  std::normal_distribution<double> gauss(0.0, scale);
  ProjectionBasis b;
  b.seed = seed;
  b.w_x.resize(dim);
  b.w_y.resize(dim);
  for (Eigen::Index k = 0; k < dim; ++k) b.w_x(k) = gauss(rng);
  for (Eigen::Index k = 0; k < dim; ++k) b.w_y(k) = gauss(rng);
  return b;
}

PlanePoint relative_position(const ModelVector& model, const ProjectionBasis& basis,
                             ProjectionMode mode, std::optional<ParameterRange> range) {
  if (model.size() != basis.w_x.size() || model.size() != basis.w_y.size())
    throw InputError("relative_position: dimension mismatch");
  if (range) {
    if (range->offset < 0 || range->length <= 0 || range->offset + range->length > model.size())
      throw InputError("relative_position: parameter range out of bounds");
    const auto w = model.segment(range->offset, range->length);
    return {axis_coordinate(w, basis.w_x.segment(range->offset, range->length), mode),
            axis_coordinate(w, basis.w_y.segment(range->offset, range->length), mode)};
  }
  return {axis_coordinate(model, basis.w_x, mode), axis_coordinate(model, basis.w_y, mode)};
}

double GridSpec::x_at(std::size_t k) const {
  return x_min + (x_max - x_min) * (static_cast<double>(k) / static_cast<double>(nx));
}

double GridSpec::y_at(std::size_t k) const {
  return y_min + (y_max - y_min) * (static_cast<double>(k) / static_cast<double>(ny));
}

Matrix landscape_grid(const Objective& obj, const ModelVector& anchor,
                      const ProjectionBasis& basis, PlanePoint anchor_coords,
                      const GridSpec& grid, unsigned threads) {
  if (grid.nx == 0 || grid.ny == 0) throw InputError("landscape_grid: resolution must be positive");
  if (anchor.size() != obj.dim() || basis.w_x.size() != obj.dim())
    throw InputError("landscape_grid: dimension mismatch");
  Matrix values(static_cast<Eigen::Index>(grid.ny + 1), static_cast<Eigen::Index>(grid.nx + 1));
  for_rows(grid.ny + 1, threads, [&](std::size_t r) {
    const double beta = grid.y_at(r) - anchor_coords.y;
    for (std::size_t c = 0; c <= grid.nx; ++c) {
      const double s = grid.x_at(c) - anchor_coords.x;
      const ModelVector point = anchor + s * basis.w_x + beta * basis.w_y;
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = obj.evaluate(point);
    }
  });
  return values;
}

Matrix gathered_landscape(const ClientPopulation& pop, const ProjectionBasis& basis,
                          const GridSpec& grid, ProjectionMode mode, unsigned threads) {
  if (pop.clients.empty()) throw InputError("gathered_landscape: empty population");
  Matrix gathered;
  for (const auto& client : pop.clients) {
    const ModelVector& anchor = client->optimum();
    const Matrix g = landscape_grid(*client, anchor, basis,
                                    relative_position(anchor, basis, mode), grid, threads);
    gathered = gathered.size() == 0 ? g : Matrix(gathered.cwiseMin(g));
  }
  return gathered;
}

void write_grid_csv(std::ostream& out, const Matrix& values, const GridSpec& grid) {
  out << std::setprecision(17);
  out << "# x_min=" << grid.x_min << ",x_max=" << grid.x_max << ",nx=" << grid.nx
      << ",y_min=" << grid.y_min << ",y_max=" << grid.y_max << ",ny=" << grid.ny << '\n';
  out << "y\\x";
  for (std::size_t c = 0; c <= grid.nx; ++c) out << ',' << grid.x_at(c);
  out << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out << grid.y_at(static_cast<std::size_t>(r));
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << ',' << values(r, c);
    out << '\n';
  }
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryPoint>& points) {
  out << std::setprecision(17);
  out << "t,x,y,distance,in_region\n";
  for (const auto& p : points)
    out << p.round << ',' << p.position.x << ',' << p.position.y << ',' << p.distance << ','
        << (p.in_region ? 1 : 0) << '\n';
}

}  // namespace fedtheory
