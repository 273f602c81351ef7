#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace comsgarch {

using Rng = std::mt19937_64;

/// Mixes a base seed with stream coordinates (iteration, candidate, fold, ...)
/// into an independent seed. splitmix64 finalizer.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords);

/// Uniform in [0, 1) from 53 random bits; stable across standard libraries.
[[nodiscard]] double uniform01(Rng& rng);

/// Standard normal via Box-Muller on uniform01, so streams are reproducible
/// independent of the library's distribution implementations.
[[nodiscard]] double standard_normal(Rng& rng);

/// Index drawn with probability proportional to weights (must sum to ~1).
[[nodiscard]] int draw_categorical(std::span<const double> probs, Rng& rng);

}  // namespace comsgarch
