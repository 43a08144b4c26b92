#include "fedtheory/random.hpp"

#include "fedtheory/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedtheory {

std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(mix_seed(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

double laplace(Rng& rng, double scale) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double v = u(rng);
  while (v == -0.5) v = u(rng);
  const double sign = v < 0.0 ? -1.0 : 1.0;
  return -scale * sign * std::log1p(-2.0 * std::abs(v));
}

double log_gamma_draw(Rng& rng, double shape) {
  if (!(shape > 0.0)) throw InputError("log_gamma_draw: shape must be > 0");
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    double v = g(rng);
    while (v <= 0.0) v = g(rng);
    return std::log(v);
  }
  std::gamma_distribution<double> g(shape + 1.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double gv = g(rng);
  while (gv <= 0.0) gv = g(rng);
  double uv = u(rng);
  while (uv <= 0.0) uv = u(rng);
  return std::log(gv) + std::log(uv) / shape;
}

std::vector<double> dirichlet(Rng& rng, double alpha, std::size_t length) {
  if (length == 0) throw InputError("dirichlet: empty support");
  std::vector<double> logs(length);
  for (auto& l : logs) l = log_gamma_draw(rng, alpha);
  const double top = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  std::vector<double> p(length);
  for (std::size_t i = 0; i < length; ++i) {
    p[i] = std::exp(logs[i] - top);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace fedtheory
