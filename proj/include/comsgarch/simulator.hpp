#pragma once

#include "comsgarch/model.hpp"
#include "comsgarch/random.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace comsgarch {

/// cogarch: alpha = c zeta, beta = -log(c) zeta, lambda = c zeta.
/// comsgarch: alpha = c zeta, beta = -log(c) zeta, lambda = zeta.
enum class BalanceFamily { cogarch, comsgarch };

enum class GapMode { fixed, exponential };

/// Draws one standardized innovation (mean 0, variance 1).
using InnovationSource = std::function<double(Rng&)>;

[[nodiscard]] InnovationSource gaussian_innovation();

struct SimConfig {
    std::size_t n = 500;  ///< number of increments
    double zeta = 10.0;
    GapMode gaps = GapMode::fixed;
    TransitionRates rates{1};
    std::uint64_t seed = 1;
    RhoMode rho_mode = RhoMode::approx;
    std::size_t burn_in = 100;
    int initial_state = 0;
    InnovationSource innovation = gaussian_innovation();

    void validate(std::size_t nu) const;
};

struct Simulation {
    ObservedSeries observed;
    DiffSeries diff;
    StatePath path;
    VolatilitySeries volatility;
};

[[nodiscard]] RegimeParams balanced_params(double zeta, const std::vector<double>& c, BalanceFamily family);

/// Forward simulation. Each step draws the gap and the state, then
/// Y_i ~ rho_i * eps_i with rho_i^2 from sigma_{i-1}^2, then sigma_i^2 from Y_i.
[[nodiscard]] Simulation simulate(const SimConfig& config, const RegimeParams& params);

enum class PerturbMode { global_sd, per_state_sd };

/// Y'_i = Y_i + z_i, z_i ~ N(0, (eps_scale * sd)^2) where sd is the sample SD of Y
/// (global) or of the Y's sharing the state of s_i (per state).
[[nodiscard]] DiffSeries perturb(const DiffSeries& diff, const StatePath& path, double eps_scale, PerturbMode mode,
                                 std::uint64_t seed);

/// Rebuild levels from increments, starting at (t0, G0).
[[nodiscard]] ObservedSeries integrate(const DiffSeries& diff, double t0 = 0.0, double G0 = 0.0);

}  // namespace comsgarch
