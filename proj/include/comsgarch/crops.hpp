#pragma once

// Bernoulli noise injection and the CROPS iteration: NI -> block MAP ->
// m candidate paths -> optimal-path selection -> merge into the full path.

#include "comsgarch/inference.hpp"
#include "comsgarch/model.hpp"
#include "comsgarch/random.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace comsgarch {

/// Which points of an observed series survive one round of noise injection.
struct NoiseMask {
    std::vector<char> keep;                 ///< one flag per observed point
    double p = 0.0;
    std::vector<std::size_t> kept_points;   ///< retained point indices >= 1, ascending

    [[nodiscard]] std::size_t kept_count() const noexcept { return kept_points.size(); }
};

struct NoiseInjection {
    DiffSeries diff;  ///< merged increments, one per kept point
    NoiseMask mask;
};

/// Drops interior points 2..n-1 independently with probability p; points 0, 1 and n
/// are always kept. Merged increments and gaps are sums over the dropped spans.
[[nodiscard]] NoiseInjection bernoulli_ni(const ObservedSeries& obs, double p, Rng& rng);

/// Builds the merged sub-series for an arbitrary keep pattern (first and last point kept).
[[nodiscard]] NoiseInjection apply_mask(const ObservedSeries& obs, std::vector<char> keep, double p = 0.0);

struct CropsConfig {
    int iterations = 1000;
    int paths = 6;             ///< candidate paths per iteration (m)
    double p = 0.02;           ///< NI rate
    InferenceConfig inference;
    std::uint64_t seed = 1;
    bool trace = true;
    int posterior_window = 200;
    std::optional<double> sigma2_0;  ///< defaults to var(Y)/mean(dt)
    bool early_stop = false;
    double early_stop_tolerance = 1e-5;
    int early_stop_span = 50;
    int threads = 1;
    bool canonical_labels = true;  ///< relabel states by ascending mean fitted volatility
    int init_sweeps = 1;           ///< Gibbs sweeps under the default start before the first MAP step

    void validate() const;
};

struct CropsInit {
    RegimeParams params;
    TransitionRates rates;
    StatePath path;
};

struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;   ///< joint log posterior of the winning candidate on the sub-series
    double theta_objective = 0.0;
    RegimeParams params;
    TransitionRates rates;
    std::size_t kept = 0;
    bool theta_converged = true;
    std::string error;        ///< set when the first attempt failed and the iteration was retried
};

struct CropsResult {
    StatePath path;
    RegimeParams params;
    TransitionRates rates;
    VolatilitySeries volatility;  ///< on the full grid under path and params
    double sigma2_0 = 0.0;
    std::vector<IterationRecord> trace;
    /// state_frequency[i][k]: share of the last W iterations whose path had s_i = k
    std::vector<std::vector<double>> state_frequency;
    int iterations_run = 0;
    bool optimizer_warning = false;
};

/// Default starting point: uniform random path, balanced parameters spread over
/// c = 0.5^(nu+1-k) at zeta = 1/mean(dt), all rates 0.1.
[[nodiscard]] CropsInit default_init(const DiffSeries& diff, std::size_t nu, Rng& rng);

[[nodiscard]] CropsResult run_crops(const ObservedSeries& obs, std::size_t nu, const CropsConfig& cfg,
                                    const std::optional<CropsInit>& init = std::nullopt);

/// Regimes holding less than this share of the path are left out of relabeling.
inline constexpr double kCanonicalMinShare = 0.05;

/// Permutes the labels of sufficiently occupied regimes so that their mean fitted
/// volatility increases with the label.
void canonicalize_labels(CropsResult& result);

}  // namespace comsgarch
