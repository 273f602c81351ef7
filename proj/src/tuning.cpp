#include "comsgarch/tuning.hpp"

#include "comsgarch/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace comsgarch {

void CvConfig::validate() const {
    if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
    if (grid.empty()) throw ValidationError("NI-rate grid is empty");
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (!(grid[j] >= 0.0 && grid[j] < 1.0)) throw ValidationError("NI rates must lie in [0,1)");
        if (j > 0 && !(grid[j] > grid[j - 1])) throw ValidationError("NI-rate grid must be strictly ascending");
    }
    crops.validate();
}

std::vector<std::vector<std::size_t>> partition_folds(const ObservedSeries& obs, int k, std::uint64_t seed) {
    obs.validate();
    if (k < 2) throw ValidationError("need at least 2 folds");
    const std::size_t interior = obs.size() >= 2 ? obs.size() - 2 : 0;
    if (static_cast<std::size_t>(k) > interior)
        throw ValidationError("fold count " + std::to_string(k) + " exceeds the " + std::to_string(interior) +
                              " interior points");
    std::vector<std::size_t> idx(interior);
    std::iota(idx.begin(), idx.end(), std::size_t{1});
    Rng rng(seed);
    // Fisher-Yates with the portable uniform source
    for (std::size_t i = idx.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
        std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
    }
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    for (std::size_t q = 0; q < idx.size(); ++q) folds[q % folds.size()].push_back(idx[q]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

std::vector<int> interpolate_states(const std::vector<double>& train_times, const std::vector<int>& train_states,
                                    const std::vector<double>& query_times) {
    if (train_times.size() != train_states.size() || train_times.empty())
        throw ValidationError("training times and states must be non-empty and of equal length");
    std::vector<int> out;
    out.reserve(query_times.size());
    for (double q : query_times) {
        const auto it = std::lower_bound(train_times.begin(), train_times.end(), q);
        if (it == train_times.end()) {
            out.push_back(train_states.back());
            continue;
        }
        const auto hi = static_cast<std::size_t>(it - train_times.begin());
        if (*it == q || hi == 0) {
            out.push_back(train_states[hi]);
            continue;
        }
        const std::size_t lo = hi - 1;
        out.push_back(q - train_times[lo] <= train_times[hi] - q ? train_states[lo] : train_states[hi]);
    }
    return out;
}

Y2Prediction predict_y2(const ObservedSeries& full, const std::vector<std::size_t>& train_points,
                        const CropsResult& trained, const std::vector<std::size_t>& validation_points) {
    const std::size_t npts = full.size();
    if (train_points.size() != trained.path.size() + 1)
        throw ValidationError("training fit does not match the training points");
    std::vector<long> pos(npts, -1);
    for (std::size_t q = 0; q < train_points.size(); ++q) {
        if (train_points[q] >= npts) throw ValidationError("training point outside the series");
        pos[train_points[q]] = static_cast<long>(q);
    }

    // training point q >= 1 carries state path[q-1]; point 0 borrows its successor's
    std::vector<double> train_times(train_points.size());
    std::vector<int> train_states(train_points.size());
    for (std::size_t q = 0; q < train_points.size(); ++q) {
        train_times[q] = full.t[train_points[q]];
        train_states[q] = trained.path.s[q == 0 ? 0 : q - 1];
    }
    auto trained_sigma2 = [&](std::size_t point) {
        const auto q = static_cast<std::size_t>(pos[point]);
        return q == 0 ? trained.sigma2_0 : trained.volatility.sigma2[q - 1];
    };

    std::vector<std::size_t> val = validation_points;
    std::sort(val.begin(), val.end());
    std::vector<double> val_times;
    for (std::size_t i : val) val_times.push_back(full.t[i]);
    const auto val_states = interpolate_states(train_times, train_states, val_times);

    Y2Prediction out;
    std::vector<double> back(npts, -1.0);
    for (std::size_t v = 0; v < val.size(); ++v) {
        const std::size_t i = val[v];
        if (i == 0 || i >= npts || pos[i] >= 0) throw ValidationError("validation point must be an interior non-training point");
        double prev = -1.0;
        if (pos[i - 1] >= 0)
            prev = trained_sigma2(i - 1);
        else if (back[i - 1] > 0.0)
            prev = back[i - 1];
        if (prev <= 0.0) {
            out.skipped.push_back(i);
            continue;
        }
        const double dt = full.t[i] - full.t[i - 1];
        const double y = full.G[i] - full.G[i - 1];
        const double pred = prev * dt;
        back[i] = sigma2_next(prev, pred, dt, trained.params, val_states[v]);
        out.points.push_back(i);
        out.observed.push_back(y * y);
        out.predicted.push_back(pred);
    }
    return out;
}

double mean_squared_error(const Y2Prediction& pred) {
    if (pred.points.empty()) throw ValidationError("no predictable validation points");
    double ss = 0.0;
    for (std::size_t q = 0; q < pred.points.size(); ++q) {
        const double e = pred.observed[q] - pred.predicted[q];
        ss += e * e;
    }
    return ss / static_cast<double>(pred.points.size());
}

CvReport select_rate(const std::vector<double>& grid, const std::vector<std::vector<double>>& fold_mse) {
    if (grid.empty() || grid.size() != fold_mse.size()) throw ValidationError("one MSE row per grid point is required");
    CvReport r;
    r.grid = grid;
    r.fold_mse = fold_mse;
    for (const auto& row : fold_mse) {
        if (row.size() < 2) throw ValidationError("need at least 2 folds per grid point");
        const double k = static_cast<double>(row.size());
        const double mean = std::accumulate(row.begin(), row.end(), 0.0) / k;
        double ss = 0.0;
        for (double l : row) ss += (l - mean) * (l - mean);
        r.mean_mse.push_back(mean);
        r.se.push_back(std::sqrt(ss / (k * (k - 1.0))));
    }
    r.best_index = static_cast<std::size_t>(std::min_element(r.mean_mse.begin(), r.mean_mse.end()) - r.mean_mse.begin());
    const double threshold = r.mean_mse[r.best_index] + r.se[r.best_index];
    r.chosen_index = r.best_index;
    r.fallback = true;
    for (std::size_t j = r.best_index; j < grid.size(); ++j) {
        if (r.mean_mse[j] >= threshold) {
            r.chosen_index = j;
            r.fallback = false;
            break;
        }
    }
    r.chosen_rate = grid[r.chosen_index];
    return r;
}

CvReport cross_validate(const ObservedSeries& obs, std::size_t nu, const CvConfig& cfg) {
    cfg.validate();
    obs.validate();
    const auto folds = partition_folds(obs, cfg.folds, cfg.seed);
    std::vector<std::vector<double>> mse(cfg.grid.size(), std::vector<double>(folds.size(), 0.0));
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<char> in_fold(obs.size(), 0);
        for (std::size_t i : folds[f]) in_fold[i] = 1;
        std::vector<std::size_t> train_points;
        ObservedSeries train;
        for (std::size_t i = 0; i < obs.size(); ++i) {
            if (in_fold[i]) continue;
            train_points.push_back(i);
            train.t.push_back(obs.t[i]);
            train.G.push_back(obs.G[i]);
        }
        for (std::size_t j = 0; j < cfg.grid.size(); ++j) {
            CropsConfig cc = cfg.crops;
            cc.p = cfg.grid[j];
            cc.seed = derive_seed(cfg.seed, {j, f});
            const CropsResult fit = run_crops(train, nu, cc);
            mse[j][f] = mean_squared_error(predict_y2(obs, train_points, fit, folds[f]));
        }
    }
    return select_rate(cfg.grid, mse);
}

}  // namespace comsgarch
