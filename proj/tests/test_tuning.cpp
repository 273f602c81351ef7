#include "comsgarch/error.hpp"
#include "comsgarch/simulator.hpp"
#include "comsgarch/tuning.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace comsgarch;

namespace {

ObservedSeries grid_series(std::size_t points) {
    ObservedSeries obs;
    for (std::size_t i = 0; i < points; ++i) {
        obs.t.push_back(static_cast<double>(i));
        obs.G.push_back(std::sin(static_cast<double>(i)));
    }
    return obs;
}

/// Two folds whose mean is m and whose standard error is d.
std::vector<double> row(double m, double d) { return {m - d, m + d}; }

}  // namespace

TEST_CASE("folds partition the interior points") {
    const auto obs = grid_series(12);
    const auto folds = partition_folds(obs, 2, 5);
    REQUIRE(folds.size() == 2);
    CHECK(folds[0].size() == 5);
    CHECK(folds[1].size() == 5);
    std::set<std::size_t> all;
    for (const auto& f : folds)
        for (std::size_t i : f) {
            CHECK(all.insert(i).second);
            CHECK(i >= 1);
            CHECK(i <= 10);
        }
    CHECK(all.size() == 10);
    CHECK(partition_folds(obs, 2, 5) == folds);
    CHECK(partition_folds(obs, 2, 6) != folds);

    const auto three = partition_folds(grid_series(102), 3, 1);
    for (const auto& f : three) CHECK((f.size() == 33 || f.size() == 34));
    CHECK_THROWS_AS((void)partition_folds(grid_series(4), 3, 1), ValidationError);
    CHECK_THROWS_AS((void)partition_folds(obs, 1, 1), ValidationError);
}

TEST_CASE("nearest-neighbour state interpolation") {
    const std::vector<double> t{0.0, 4.0, 8.0};
    const std::vector<int> s{0, 0, 1};
    CHECK(interpolate_states(t, s, {2.0}) == std::vector<int>{0});   // same-state neighbours
    CHECK(interpolate_states(t, s, {5.0}) == std::vector<int>{0});   // a quarter into a switch span
    CHECK(interpolate_states(t, s, {7.0}) == std::vector<int>{1});
    CHECK(interpolate_states(t, s, {6.0}) == std::vector<int>{0});   // midpoint goes to the earlier time
    CHECK(interpolate_states(t, s, {8.0}) == std::vector<int>{1});
    CHECK(interpolate_states(t, s, {9.0, -1.0}) == std::vector<int>{1, 0});
    CHECK_THROWS_AS((void)interpolate_states({}, {}, {1.0}), ValidationError);
}

TEST_CASE("squared-increment prediction follows the hand recursion") {
    ObservedSeries full{{0.0, 1.0, 2.0, 3.0, 5.0}, {0.0, 0.3, 0.1, 0.6, 0.2}};
    CropsResult fit;
    fit.path.s = {0, 1};
    fit.params = RegimeParams{{0.2, 0.9}, {1.5, 0.7}, {0.4, 0.1}};
    fit.rates = TransitionRates(2, 0.1);
    fit.volatility.sigma2 = {0.35, 0.8};
    fit.sigma2_0 = 0.5;
    const auto pred = predict_y2(full, {0, 1, 4}, fit, {2, 3});
    REQUIRE(pred.points == std::vector<std::size_t>{2, 3});
    CHECK(pred.skipped.empty());

    // point 2: predecessor is training point 1; point 3 chains from the back-calculated variance
    const double p2 = 0.35 * 1.0;
    const double s2 = 0.2 * 1.0 + (0.35 + 0.4 * p2) * std::exp(-1.5 * 1.0);  // state 0 nearest at t=2
    const double p3 = s2 * 1.0;
    CHECK(pred.predicted[0] == doctest::Approx(p2).epsilon(1e-15));
    CHECK(pred.predicted[1] == doctest::Approx(p3).epsilon(1e-15));
    CHECK(pred.observed[0] == doctest::Approx(0.04));
    CHECK(pred.observed[1] == doctest::Approx(0.25));
    for (double v : pred.predicted) CHECK(v > 0.0);

    const double mse = mean_squared_error(pred);
    CHECK(mse == doctest::Approx(((0.04 - p2) * (0.04 - p2) + (0.25 - p3) * (0.25 - p3)) / 2.0));

    // with instant decay the chained variance is alpha * dt
    fit.params = RegimeParams{{0.2, 0.9}, {1e6, 1e6}, {0.4, 0.1}};
    const auto flat = predict_y2(full, {0, 1, 4}, fit, {2, 3});
    CHECK(flat.predicted[1] == doctest::Approx(0.2 * 1.0 * 1.0));

    // validation points whose predecessor is in neither set cannot be chained
    ObservedSeries six{{0, 1, 2, 3, 4, 5}, {0, 1, 2, 3, 4, 5}};
    CropsResult small;
    small.path.s = {0, 0};
    small.params = RegimeParams{{0.2}, {1.5}, {0.4}};
    small.rates = TransitionRates(1);
    small.volatility.sigma2 = {0.3, 0.3};
    small.sigma2_0 = 0.3;
    const auto sk = predict_y2(six, {0, 1, 5}, small, {3, 4});
    CHECK(sk.points.empty());
    CHECK(sk.skipped == std::vector<std::size_t>{3, 4});
    CHECK_THROWS_AS((void)predict_y2(six, {0, 1, 4, 5}, small, {2}), ValidationError);
    CHECK_THROWS_AS((void)predict_y2(six, {0, 1, 5}, small, {1}), ValidationError);
    CHECK_THROWS_AS((void)mean_squared_error(Y2Prediction{}), ValidationError);
}

TEST_CASE("one-standard-error rule") {
    const std::vector<double> grid{0.0, 0.01, 0.02, 0.03};
    const auto r = select_rate(grid, {row(1.0, 0.1), row(0.5, 0.2), row(0.8, 0.1), row(1.2, 0.1)});
    CHECK(r.best_index == 1);
    CHECK(r.se[1] == doctest::Approx(0.2));
    CHECK(r.mean_mse[2] == doctest::Approx(0.8));
    CHECK(r.chosen_index == 2);
    CHECK(r.chosen_rate == 0.02);
    CHECK_FALSE(r.fallback);

    const auto same = select_rate(grid, {row(0.7, 0.0), row(0.7, 0.0), row(0.7, 0.0), row(0.7, 0.0)});
    CHECK(same.best_index == 0);
    CHECK(same.chosen_index == 0);

    const auto noisy_same = select_rate(grid, {row(0.7, 0.1), row(0.7, 0.1), row(0.7, 0.1), row(0.7, 0.1)});
    CHECK(noisy_same.chosen_index == 0);
    CHECK(noisy_same.fallback);

    const auto single = select_rate({0.05}, {row(2.0, 0.5)});
    CHECK(single.chosen_rate == 0.05);

    const auto fb = select_rate({0.0, 0.01, 0.02}, {row(1.0, 0.1), row(0.5, 0.2), row(0.6, 0.1)});
    CHECK(fb.best_index == 1);
    CHECK(fb.chosen_index == 1);
    CHECK(fb.fallback);

    // standard error uses sqrt(sum of squares / (k (k - 1)))
    const auto k3 = select_rate({0.0}, {{1.0, 2.0, 4.0}});
    CHECK(k3.se[0] == doctest::Approx(std::sqrt(7.0 / 9.0)));

    CHECK_THROWS_AS((void)select_rate({0.0, 0.1}, {row(1.0, 0.1)}), ValidationError);
    CHECK_THROWS_AS((void)select_rate({0.0}, {{1.0}}), ValidationError);
}

TEST_CASE("cross-validation runs end to end and is deterministic") {
    SimConfig sc;
    sc.n = 80;
    sc.seed = 3;
    const auto sim = simulate(sc, balanced_params(10.0, {0.1}, BalanceFamily::cogarch));
    CvConfig cfg;
    cfg.folds = 2;
    cfg.grid = {0.0, 0.05};
    cfg.crops.iterations = 5;
    const auto a = cross_validate(sim.observed, 1, cfg);
    const auto b = cross_validate(sim.observed, 1, cfg);
    REQUIRE(a.mean_mse.size() == 2);
    REQUIRE(a.fold_mse.size() == 2);
    CHECK(a.fold_mse[0].size() == 2);
    CHECK(a.mean_mse == b.mean_mse);
    CHECK(a.chosen_index < 2);
    for (double m : a.mean_mse) CHECK((std::isfinite(m) && m > 0.0));

    CvConfig bad = cfg;
    bad.grid = {0.05, 0.0};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad.grid = {};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.folds = 1;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}
