#pragma once

// Verification and theory harnesses: exhaustive path enumeration, ensemble
// sizes and weights of noise injection, perturbation-stability checks, and
// the evaluation metrics used in the simulation studies.

#include "comsgarch/crops.hpp"
#include "comsgarch/inference.hpp"
#include "comsgarch/model.hpp"

#include <cstdint>
#include <vector>

namespace comsgarch {

inline constexpr std::size_t kMaxEnumeratedPaths = 1'000'000;

/// Every path of length n over nu states with its exact joint log posterior.
/// Path index encodes states in base nu, s_0 most significant.
class PathEnumeration {
public:
    PathEnumeration(const DiffSeries& diff, const RegimeParams& params, const TransitionRates& rates,
                    double sigma2_0, const InferenceConfig& cfg);

    [[nodiscard]] std::size_t count() const noexcept { return log_post_.size(); }
    [[nodiscard]] std::size_t length() const noexcept { return n_; }
    [[nodiscard]] StatePath path(std::size_t index) const;
    [[nodiscard]] std::size_t index_of(const StatePath& path) const;
    [[nodiscard]] double log_posterior(std::size_t index) const { return log_post_[index]; }
    [[nodiscard]] const std::vector<double>& log_posteriors() const noexcept { return log_post_; }
    /// Normalized posterior probability of every path.
    [[nodiscard]] std::vector<double> probabilities() const;
    /// f(s_i | all other states of `path`) by renormalizing over the nu completions.
    [[nodiscard]] std::vector<double> conditional(std::size_t i, const StatePath& path) const;
    /// Posterior marginal P(s_i = k) summed over all paths.
    [[nodiscard]] std::vector<double> marginal(std::size_t i) const;

private:
    std::size_t n_ = 0;
    std::size_t nu_ = 0;
    std::vector<double> log_post_;
};

struct EnsembleWeight {
    double count = 0.0;   ///< binomial(k-1, b-1) ways to pick the pivotal window
    double weight = 0.0;  ///< p^(k-b) (1-p)^(b-1), with 0^0 = 1
};

[[nodiscard]] EnsembleWeight ensemble_weight(int k, int b, double p);

/// count * weight * (1-p): the negative-binomial mass of needing k points for b kept.
[[nodiscard]] double negative_binomial_mass(int k, int b, double p);

struct EnsembleRow {
    int k = 0;
    int b = 0;
    double p = 0.0;
    double count = 0.0;
    double weight = 0.0;
};

[[nodiscard]] std::vector<EnsembleRow> ensemble_table(const std::vector<int>& b_values,
                                                      const std::vector<double>& p_values, int k_max);

/// Expected objective changes, per unit of perturbation variance, for one merged
/// span of increments with variances rho2_values.
struct StabilitySpan {
    double ni_term = 0.0;        ///< m / (2 sum rho^2): merged increment, m = span length
    double no_ni_term = 0.0;     ///< sum 1/(2 rho^2): each increment separately
    double ratio = 0.0;          ///< ni_term / no_ni_term; 2 rho1^2 rho2^2 / (rho1^2 + rho2^2)^2 for a pair
    double cross_product = 0.0;  ///< sum rho^2 * sum rho^-2 >= m^2
};

[[nodiscard]] StabilitySpan stability_ratio(const std::vector<double>& rho2_values);

struct StabilityOutcome {
    double mean_ni = 0.0;        ///< mean objective change with the NI mask applied
    double mean_no_ni = 0.0;     ///< mean objective change on the full series
    double se_ni = 0.0;
    double se_no_ni = 0.0;
    double mean_gap = 0.0;       ///< mean of (no-NI change - NI change), paired
    double se_gap = 0.0;
    double expected_ni = 0.0;    ///< closed form eps^2 * sum over spans of ni_term
    double expected_no_ni = 0.0; ///< closed form eps^2 * sum of no_ni_term
    int reps = 0;
};

/// Monte Carlo comparison of objective changes under Y' = Y + z, z ~ N(0, eps^2).
/// (params, path) fix the increment variances; the mask is held fixed across
/// replications and a merged span uses the sum of its members' variances.
[[nodiscard]] StabilityOutcome stability_experiment(const DiffSeries& diff, const StatePath& path,
                                                    const RegimeParams& params, double sigma2_0, RhoMode mode,
                                                    const std::vector<char>& keep, double eps, int reps,
                                                    std::uint64_t seed);

/// Same, with the mask drawn once from Bernoulli NI at rate p.
[[nodiscard]] StabilityOutcome stability_experiment(const DiffSeries& diff, const StatePath& path,
                                                    const RegimeParams& params, double sigma2_0, RhoMode mode,
                                                    double p, double eps, int reps, std::uint64_t seed);

/// mean_i (1 - freq_i(true state)); equals mean |1{true=2} - freq_i(2)| for two states.
[[nodiscard]] double state_bias(const StatePath& truth, const std::vector<std::vector<double>>& frequencies);
[[nodiscard]] double state_bias(const StatePath& truth, const StatePath& predicted);

/// 100 * mean |est - true| / true over indices with positive true volatility.
[[nodiscard]] double vol_rel_bias(const std::vector<double>& true_sigma2, const std::vector<double>& est_sigma2,
                                  std::size_t* excluded = nullptr);

}  // namespace comsgarch
