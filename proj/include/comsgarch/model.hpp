#pragma once

// Domain types and the deterministic COMS-GARCH math: the volatility recursion,
// regime transition probabilities, increment variances and the negative log
// pseudo-likelihood of a state path.
//
// State labels are zero-based in memory (0..nu-1). Files written by the io
// layer use one-based labels.

#include <cstddef>
#include <span>
#include <vector>

namespace comsgarch {

enum class RhoMode { exact, approx };

/// Raw observed series: timestamps t_i and levels G_i, i = 0..n.
struct ObservedSeries {
    std::vector<double> t;
    std::vector<double> G;

    [[nodiscard]] std::size_t size() const noexcept { return t.size(); }
    /// Throws ValidationError unless t is strictly increasing and sizes agree (>= 2 points).
    void validate() const;
};

/// Increments Y_i = G_i - G_{i-1} over gaps dt_i = t_i - t_{i-1}, i = 1..n.
struct DiffSeries {
    std::vector<double> Y;
    std::vector<double> dt;

    [[nodiscard]] std::size_t size() const noexcept { return Y.size(); }
    void validate() const;
};

/// Per-state GARCH parameters (alpha, beta, lambda), all strictly positive.
struct RegimeParams {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> lambda;

    [[nodiscard]] std::size_t states() const noexcept { return alpha.size(); }
    void validate() const;
    bool operator==(const RegimeParams&) const = default;
};

/// Off-diagonal transition rates eta(to, from); the diagonal is unused and kept at 0.
class TransitionRates {
public:
    TransitionRates() = default;
    explicit TransitionRates(std::size_t nu, double rate = 0.0);

    [[nodiscard]] std::size_t states() const noexcept { return nu_; }
    [[nodiscard]] double operator()(std::size_t to, std::size_t from) const { return eta_[to * nu_ + from]; }
    double& operator()(std::size_t to, std::size_t from) { return eta_[to * nu_ + from]; }
    void validate() const;
    bool operator==(const TransitionRates&) const = default;

private:
    std::size_t nu_ = 0;
    std::vector<double> eta_;
};

/// One regime label per increment.
struct StatePath {
    std::vector<int> s;

    [[nodiscard]] std::size_t size() const noexcept { return s.size(); }
    void validate(std::size_t nu) const;
    bool operator==(const StatePath&) const = default;
};

struct VolatilitySeries {
    std::vector<double> sigma2;  ///< sigma_i^2, i = 1..n
    std::vector<double> rho2;    ///< variance of Y_i given the past
    double sigma2_0 = 0.0;
};

struct PivotalWindow {
    int b = 20;
    void validate() const;
};

/// Floor applied to alpha and lambda so the recursion stays strictly positive.
inline constexpr double kParamFloor = 1e-12;

[[nodiscard]] DiffSeries diff_series(const ObservedSeries& obs);

/// alpha(s) dt + (sigma2_prev + lambda(s) y2) exp(-beta(s) dt).
[[nodiscard]] double sigma2_next(double sigma2_prev, double y2, double dt, const RegimeParams& params, int state);

/// Probability of moving from `from` to `to` over a gap dt. The stay case uses
/// 2 - nu + sum_{j != from} exp(-eta(j, from) dt), which is exp(-eta dt) for two states.
[[nodiscard]] double transition_prob(int from, int to, double dt, const TransitionRates& rates);

/// Exact conditional variance of an increment over dt given sigma2_prev.
[[nodiscard]] double rho2_exact(double sigma2_prev, double dt, const RegimeParams& params, int state);

/// First-order version: sigma2_prev * dt.
[[nodiscard]] double rho2_approx(double sigma2_prev, double dt);

[[nodiscard]] double rho2(RhoMode mode, double sigma2_prev, double dt, const RegimeParams& params, int state);

/// Forward recursion of sigma^2 and rho^2 along a fixed path.
[[nodiscard]] VolatilitySeries volatility_path(const DiffSeries& diff, const StatePath& path,
                                               const RegimeParams& params, double sigma2_0, RhoMode mode);

/// Sum of Gaussian terms 1/2 log(2 pi rho^2) + Y^2/(2 rho^2).
[[nodiscard]] double gaussian_nll(const DiffSeries& diff, const StatePath& path, const RegimeParams& params,
                                  double sigma2_0, RhoMode mode);

/// -sum_{i>=2} log P(s_{i-1} -> s_i over dt_i).
[[nodiscard]] double transition_nll(std::span<const double> dt, const StatePath& path, const TransitionRates& rates);

/// Gaussian part plus transition part.
[[nodiscard]] double neg_log_pseudo_likelihood(const DiffSeries& diff, const StatePath& path,
                                               const RegimeParams& params, const TransitionRates& rates,
                                               double sigma2_0, RhoMode mode);

/// Method-of-moments starting variance var(Y) / mean(dt).
[[nodiscard]] double default_sigma2_0(const DiffSeries& diff);

}  // namespace comsgarch
