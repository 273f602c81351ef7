#include "comsgarch/forecast.hpp"

#include "comsgarch/error.hpp"

#include <algorithm>
#include <string>

namespace comsgarch {

std::vector<double> ForecastState::sigma2_bar() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.sigma2_bar);
    return out;
}

ForecastState forecast(const RegimeParams& params, const TransitionRates& rates, double sigma2_last, int state_last,
                       const std::vector<double>& future_dt, const ForecastOptions& options) {
    params.validate();
    rates.validate();
    const std::size_t nu = params.states();
    if (rates.states() != nu) throw ValidationError("parameters and rates disagree on the state count");
    if (future_dt.empty()) throw ValidationError("forecast horizon must be >= 1");
    if (!(sigma2_last > 0.0)) throw ValidationError("last variance must be positive");
    for (double d : future_dt)
        if (!(d > 0.0)) throw ValidationError("future gaps must be positive");

    if (!options.prune) {
        std::size_t branches = 1;
        for (std::size_t i = 0; i < future_dt.size(); ++i) {
            if (branches > options.branch_cap / nu)
                throw ValidationError("forecast tree would exceed " + std::to_string(options.branch_cap) +
                                      " branches at step " + std::to_string(i + 1) +
                                      "; shorten the horizon or enable pruning");
            branches *= nu;
        }
    }

    ForecastState out;
    std::vector<int> states{state_last};
    std::vector<double> sigma2{sigma2_last};
    std::vector<double> prob{1.0};
    for (double dt : future_dt) {
        ForecastStep step;
        step.dt = dt;
        step.states.resize(states.size() * nu);
        step.sigma2.resize(states.size() * nu);
        step.prob.resize(states.size() * nu);
        for (std::size_t k = 0; k < states.size(); ++k) {
            const double y2 = sigma2[k] * dt;
            for (std::size_t j = 0; j < nu; ++j) {
                const std::size_t c = k * nu + j;
                step.states[c] = static_cast<int>(j);
                step.sigma2[c] = sigma2_next(sigma2[k], y2, dt, params, static_cast<int>(j));
                step.prob[c] = prob[k] * transition_prob(states[k], static_cast<int>(j), dt, rates);
            }
        }

        if (options.prune && step.prob.size() > 1) {
            ForecastStep kept;
            kept.dt = dt;
            double total = 0.0;
            for (std::size_t c = 0; c < step.prob.size(); ++c) {
                if (step.prob[c] < options.prune_threshold) continue;
                kept.states.push_back(step.states[c]);
                kept.sigma2.push_back(step.sigma2[c]);
                kept.prob.push_back(step.prob[c]);
                total += step.prob[c];
            }
            for (double& p : kept.prob) p /= total;
            if (kept.prob.size() > options.branch_cap)
                throw ValidationError("forecast tree exceeds the branch cap even after pruning");
            step = std::move(kept);
        }

        for (std::size_t c = 0; c < step.prob.size(); ++c) step.sigma2_bar += step.prob[c] * step.sigma2[c];
        states = step.states;
        sigma2 = step.sigma2;
        prob = step.prob;
        out.steps.push_back(std::move(step));
    }
    return out;
}

ForecastState forecast(const CropsResult& result, const std::vector<double>& future_dt,
                       const ForecastOptions& options) {
    if (result.path.size() == 0) throw ValidationError("fit result has an empty path");
    return forecast(result.params, result.rates, result.volatility.sigma2.back(), result.path.s.back(), future_dt,
                    options);
}

std::vector<double> default_future_gaps(const DiffSeries& diff, std::size_t h) {
    if (diff.size() == 0) throw ValidationError("empty series");
    std::vector<double> d = diff.dt;
    const auto mid = d.begin() + static_cast<long>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double median = *mid;
    if (d.size() % 2 == 0) median = 0.5 * (median + *std::max_element(d.begin(), mid));
    return std::vector<double>(h, median);
}

}  // namespace comsgarch
