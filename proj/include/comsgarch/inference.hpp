#pragma once

// Conditional posteriors and estimation primitives: the state-conditional
// distribution with pivotal-b truncation, single-state sampling, Gibbs sweeps
// and block MAP optimization of the regime parameters and transition rates.
// Priors are flat on the positive orthant.

#include "comsgarch/model.hpp"
#include "comsgarch/random.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace comsgarch {

struct InferenceConfig {
    PivotalWindow pivotal{20};
    RhoMode rho_mode = RhoMode::approx;
    /// Constant log-prior value; flat priors only shift the objective.
    double log_prior = 0.0;
    double step_tolerance = 1e-8;
    int max_evaluations = 2000;

    void validate() const;
};

/// Rates below this are reported when the path never switches out of a state.
inline constexpr double kRateFloor = 1e-8;
inline constexpr double kRateCeiling = 1e6;

/// Probability vector of s_i (zero-based i) given the rest of the path. Gaussian
/// terms run over t = i..min(i+b, n-1); the incoming transition factor is
/// dropped at i = 0 and the outgoing one at i = n-1.
[[nodiscard]] std::vector<double> state_conditional(std::size_t i, const StatePath& path, const RegimeParams& params,
                                                    const TransitionRates& rates, const DiffSeries& diff,
                                                    double sigma2_0, const InferenceConfig& cfg);

/// Same distribution when sigma^2_{i-1} under the current path is already known.
[[nodiscard]] std::vector<double> state_conditional_from(std::size_t i, double sigma2_prev, const StatePath& path,
                                                         const RegimeParams& params, const TransitionRates& rates,
                                                         const DiffSeries& diff, const InferenceConfig& cfg);

[[nodiscard]] int sample_state(std::size_t i, const StatePath& path, const RegimeParams& params,
                               const TransitionRates& rates, const DiffSeries& diff, double sigma2_0,
                               const InferenceConfig& cfg, Rng& rng);

/// One ascending Gibbs sweep over [first, last] (inclusive, zero-based). Each draw
/// conditions on the states already updated earlier in the same sweep.
[[nodiscard]] StatePath gibbs_sweep(StatePath path, const RegimeParams& params, const TransitionRates& rates,
                                    const DiffSeries& diff, double sigma2_0, const InferenceConfig& cfg, Rng& rng,
                                    std::size_t first, std::size_t last);

struct ThetaEstimate {
    RegimeParams params;
    double objective = 0.0;  ///< Gaussian negative log pseudo-likelihood minus log prior
    int evaluations = 0;
    bool converged = false;
};

/// Minimizes the Gaussian block over log(alpha, beta, lambda) for every state.
[[nodiscard]] ThetaEstimate map_theta(const StatePath& path, const DiffSeries& diff, double sigma2_0,
                                      const InferenceConfig& cfg, const RegimeParams& init);

/// Objective minimized by map_theta.
[[nodiscard]] double theta_objective(const RegimeParams& params, const StatePath& path, const DiffSeries& diff,
                                     double sigma2_0, const InferenceConfig& cfg);

struct EtaEstimate {
    TransitionRates rates;
    double objective = 0.0;  ///< transition negative log-likelihood minus log prior
    bool at_boundary = false; ///< some rate hit the floor or the ceiling
};

/// Maximizes the transition block per source state. For two states each rate is
/// a one-dimensional concave problem solved by root finding on its derivative.
[[nodiscard]] EtaEstimate map_eta(const StatePath& path, std::span<const double> dt, const InferenceConfig& cfg,
                                  const TransitionRates& init);

[[nodiscard]] double eta_objective(const TransitionRates& rates, const StatePath& path, std::span<const double> dt,
                                   const InferenceConfig& cfg);

/// Path-scoring functional: minus the joint negative log pseudo-likelihood plus log priors.
[[nodiscard]] double joint_log_posterior(const RegimeParams& params, const TransitionRates& rates,
                                         const StatePath& path, const DiffSeries& diff, double sigma2_0,
                                         const InferenceConfig& cfg);

}  // namespace comsgarch
