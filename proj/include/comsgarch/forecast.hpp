#pragma once

// h-step-ahead volatility forecast over the tree of future state sequences.

#include "comsgarch/crops.hpp"
#include "comsgarch/model.hpp"

#include <cstddef>
#include <vector>

namespace comsgarch {

struct ForecastOptions {
    std::size_t branch_cap = std::size_t{1} << 20;
    /// Drop branches with probability below prune_threshold and renormalize
    /// instead of failing when the tree outgrows branch_cap.
    bool prune = false;
    double prune_threshold = 1e-12;
};

/// Branch arrays for one step; branch (k, j) of the parent array sits at k * nu + j.
struct ForecastStep {
    std::vector<int> states;
    std::vector<double> sigma2;
    std::vector<double> prob;
    double dt = 0.0;
    double sigma2_bar = 0.0;  ///< prob^T sigma2
};

struct ForecastState {
    std::vector<ForecastStep> steps;

    [[nodiscard]] std::vector<double> sigma2_bar() const;
};

/// Starts from the last fitted variance and state (probability 1).
[[nodiscard]] ForecastState forecast(const RegimeParams& params, const TransitionRates& rates, double sigma2_last,
                                     int state_last, const std::vector<double>& future_dt,
                                     const ForecastOptions& options = {});

[[nodiscard]] ForecastState forecast(const CropsResult& result, const std::vector<double>& future_dt,
                                     const ForecastOptions& options = {});

/// Median historical gap repeated h times.
[[nodiscard]] std::vector<double> default_future_gaps(const DiffSeries& diff, std::size_t h);

}  // namespace comsgarch
