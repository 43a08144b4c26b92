#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedtheory {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t value);

/// Seed for a sub-stream identified by (base, a, b), e.g. (noise_seed,
/// client, round).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Laplace(0, scale) via inverse CDF.
double laplace(Rng& rng, double scale);

/// log of a Gamma(shape, 1) draw. Uses G(a) = G(a + 1) * U^(1/a) in log
/// space so shapes far below 1 do not underflow to zero.
double log_gamma_draw(Rng& rng, double shape);

/// Dirichlet(alpha, ..., alpha) sample of the given length (normalized
/// Gamma draws, normalized with log-sum-exp).
std::vector<double> dirichlet(Rng& rng, double alpha, std::size_t length);

}  // namespace fedtheory
