#pragma once

// k-fold cross-validation of the NI rate with the one-standard-error rule.

#include "comsgarch/crops.hpp"
#include "comsgarch/model.hpp"

#include <cstdint>
#include <vector>

namespace comsgarch {

struct CvConfig {
    int folds = 5;
    std::vector<double> grid{0.0, 0.01, 0.02, 0.03, 0.04};
    CropsConfig crops;
    std::uint64_t seed = 1;

    void validate() const;
};

struct CvReport {
    std::vector<double> grid;
    std::vector<double> mean_mse;
    std::vector<double> se;
    std::vector<std::vector<double>> fold_mse;  ///< [grid point][fold]
    std::size_t best_index = 0;     ///< argmin of mean_mse (zero-based)
    std::size_t chosen_index = 0;   ///< after the one-standard-error correction
    double chosen_rate = 0.0;
    bool fallback = false;          ///< no grid point met the threshold; kept best_index
};

/// Splits interior point indices 1..N-2 into k disjoint validation sets at random.
[[nodiscard]] std::vector<std::vector<std::size_t>> partition_folds(const ObservedSeries& obs, int k,
                                                                    std::uint64_t seed);

/// Nearest training neighbour's state for each query time; exact midpoints go
/// to the earlier neighbour. Queries outside the range take the closest end.
[[nodiscard]] std::vector<int> interpolate_states(const std::vector<double>& train_times,
                                                  const std::vector<int>& train_states,
                                                  const std::vector<double>& query_times);

struct Y2Prediction {
    std::vector<std::size_t> points;  ///< validation point indices that were predicted
    std::vector<double> observed;     ///< Y_i^2
    std::vector<double> predicted;    ///< sigma^2_{i-1} dt_i
    std::vector<std::size_t> skipped; ///< validation points with no predictable predecessor
};

/// Predicts Y_i^2 at validation points of `full` from a fit on the training
/// points. sigma^2_{i-1} comes from the fit when point i-1 is a training point,
/// and is otherwise rebuilt through the recursion from the previous prediction.
[[nodiscard]] Y2Prediction predict_y2(const ObservedSeries& full, const std::vector<std::size_t>& train_points,
                                      const CropsResult& trained, const std::vector<std::size_t>& validation_points);

[[nodiscard]] double mean_squared_error(const Y2Prediction& pred);

/// j* = argmin of fold-mean MSE; the chosen index is the first index from j*
/// onwards whose mean is >= mean[j*] + se[j*], else j*.
[[nodiscard]] CvReport select_rate(const std::vector<double>& grid, const std::vector<std::vector<double>>& fold_mse);

[[nodiscard]] CvReport cross_validate(const ObservedSeries& obs, std::size_t nu, const CvConfig& cfg);

}  // namespace comsgarch
