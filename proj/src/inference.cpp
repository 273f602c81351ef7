#include "comsgarch/inference.hpp"

#include "comsgarch/error.hpp"
#include "comsgarch/optimizer.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace comsgarch {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_or_neg_inf(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

void normalize_log_weights(std::vector<double>& w) {
    const double mx = *std::max_element(w.begin(), w.end());
    if (!std::isfinite(mx)) throw DomainError("every candidate state has zero conditional probability");
    double total = 0.0;
    for (double& x : w) {
        x = std::exp(x - mx);
        total += x;
    }
    for (double& x : w) x /= total;
}

double sigma2_before(std::size_t i, const StatePath& path, const RegimeParams& params, const DiffSeries& diff,
                     double sigma2_0) {
    double prev = sigma2_0;
    for (std::size_t t = 0; t < i; ++t) {
        try {
            prev = sigma2_next(prev, diff.Y[t] * diff.Y[t], diff.dt[t], params, path.s[t]);
        } catch (const DomainError& e) {
            rethrow_with_index(e, t);
        }
    }
    return prev;
}

}  // namespace

void InferenceConfig::validate() const {
    pivotal.validate();
    if (!(step_tolerance > 0.0)) throw ValidationError("optimizer step tolerance must be positive");
    if (max_evaluations < 1) throw ValidationError("optimizer evaluation budget must be >= 1");
}

std::vector<double> state_conditional_from(std::size_t i, double sigma2_prev, const StatePath& path,
                                           const RegimeParams& params, const TransitionRates& rates,
                                           const DiffSeries& diff, const InferenceConfig& cfg) {
    const std::size_t n = diff.size();
    if (i >= n) throw ValidationError("state index out of range");
    const std::size_t nu = params.states();
    std::vector<double> logw(nu, 0.0);
    if (nu == 1) return {1.0};

    const std::size_t last = std::min(n - 1, i + static_cast<std::size_t>(cfg.pivotal.b));
    for (std::size_t v = 0; v < nu; ++v) {
        const int cand = static_cast<int>(v);
        try {
            double lw = 0.0;
            if (i > 0) lw += log_or_neg_inf(transition_prob(path.s[i - 1], cand, diff.dt[i], rates));
            if (i + 1 < n) lw += log_or_neg_inf(transition_prob(cand, path.s[i + 1], diff.dt[i + 1], rates));
            double prev = sigma2_prev;
            for (std::size_t t = i; t <= last && std::isfinite(lw); ++t) {
                const int st = t == i ? cand : path.s[t];
                const double y2 = diff.Y[t] * diff.Y[t];
                const double r = rho2(cfg.rho_mode, prev, diff.dt[t], params, st);
                lw += -0.5 * std::log(r) - y2 / (2.0 * r);
                prev = sigma2_next(prev, y2, diff.dt[t], params, st);
            }
            logw[v] = lw;
        } catch (const DomainError& e) {
            throw DomainError(std::string(e.what()) + " [candidate state " + std::to_string(v) + "]", i);
        }
    }
    normalize_log_weights(logw);
    return logw;
}

std::vector<double> state_conditional(std::size_t i, const StatePath& path, const RegimeParams& params,
                                      const TransitionRates& rates, const DiffSeries& diff, double sigma2_0,
                                      const InferenceConfig& cfg) {
    if (path.size() != diff.size()) throw ValidationError("path and series differ in length");
    if (i >= diff.size()) throw ValidationError("state index out of range");
    return state_conditional_from(i, sigma2_before(i, path, params, diff, sigma2_0), path, params, rates, diff, cfg);
}

int sample_state(std::size_t i, const StatePath& path, const RegimeParams& params, const TransitionRates& rates,
                 const DiffSeries& diff, double sigma2_0, const InferenceConfig& cfg, Rng& rng) {
    const auto probs = state_conditional(i, path, params, rates, diff, sigma2_0, cfg);
    return draw_categorical(probs, rng);
}

StatePath gibbs_sweep(StatePath path, const RegimeParams& params, const TransitionRates& rates,
                      const DiffSeries& diff, double sigma2_0, const InferenceConfig& cfg, Rng& rng,
                      std::size_t first, std::size_t last) {
    if (path.size() != diff.size()) throw ValidationError("path and series differ in length");
    if (diff.size() == 0 || first > last || last >= diff.size()) return path;
    double prev = sigma2_before(first, path, params, diff, sigma2_0);
    for (std::size_t i = first; i <= last; ++i) {
        const auto probs = state_conditional_from(i, prev, path, params, rates, diff, cfg);
        path.s[i] = draw_categorical(probs, rng);
        prev = sigma2_next(prev, diff.Y[i] * diff.Y[i], diff.dt[i], params, path.s[i]);
    }
    return path;
}

double theta_objective(const RegimeParams& params, const StatePath& path, const DiffSeries& diff, double sigma2_0,
                       const InferenceConfig& cfg) {
    return gaussian_nll(diff, path, params, sigma2_0, cfg.rho_mode) - cfg.log_prior;
}

ThetaEstimate map_theta(const StatePath& path, const DiffSeries& diff, double sigma2_0, const InferenceConfig& cfg,
                        const RegimeParams& init) {
    cfg.validate();
    init.validate();
    path.validate(init.states());
    if (path.size() != diff.size()) throw ValidationError("path and series differ in length");
    const std::size_t nu = init.states();

    // a regime only enters the objective through sigma^2 at indices before the last
    std::vector<std::size_t> active;
    {
        std::vector<char> used(nu, 0);
        for (std::size_t i = 0; i + 1 < path.size(); ++i) used[static_cast<std::size_t>(path.s[i])] = 1;
        for (std::size_t k = 0; k < nu; ++k)
            if (used[k]) active.push_back(k);
    }
    if (active.empty()) {
        ThetaEstimate est;
        est.params = init;
        est.objective = theta_objective(init, path, diff, sigma2_0, cfg);
        est.converged = true;
        return est;
    }
    const std::size_t dim = 3 * active.size();

    auto unpack = [&](std::span<const double> x) {
        RegimeParams p = init;
        for (std::size_t a = 0; a < active.size(); ++a) {
            const std::size_t k = active[a];
            p.alpha[k] = std::max(std::exp(x[3 * a]), kParamFloor);
            p.beta[k] = std::max(std::exp(x[3 * a + 1]), kParamFloor);
            p.lambda[k] = std::max(std::exp(x[3 * a + 2]), kParamFloor);
        }
        return p;
    };

    std::vector<double> x0(dim);
    for (std::size_t a = 0; a < active.size(); ++a) {
        const std::size_t k = active[a];
        x0[3 * a] = std::log(init.alpha[k]);
        x0[3 * a + 1] = std::log(init.beta[k]);
        x0[3 * a + 2] = std::log(init.lambda[k]);
    }

    auto objective = [&](std::span<const double> x) {
        try {
            return theta_objective(unpack(x), path, diff, sigma2_0, cfg);
        } catch (const DomainError&) {
            return kInf;
        }
    };

    NelderMeadOptions opt;
    opt.step_tolerance = cfg.step_tolerance;
    opt.max_evaluations = cfg.max_evaluations;
    opt.initial_step = 0.5;
    opt.lower.assign(dim, std::log(kParamFloor));
    opt.upper.assign(dim, std::log(1e8));
    const auto res = nelder_mead(objective, x0, opt);

    ThetaEstimate est;
    est.params = unpack(res.x);
    est.objective = res.value;
    est.evaluations = res.evaluations;
    est.converged = res.converged;
    return est;
}

double eta_objective(const TransitionRates& rates, const StatePath& path, std::span<const double> dt,
                     const InferenceConfig& cfg) {
    return transition_nll(dt, path, rates) - cfg.log_prior;
}

EtaEstimate map_eta(const StatePath& path, std::span<const double> dt, const InferenceConfig& cfg,
                    const TransitionRates& init) {
    init.validate();
    const std::size_t nu = init.states();
    path.validate(nu);
    if (path.size() != dt.size()) throw ValidationError("path and gaps differ in length");
    if (path.size() < 2) throw ValidationError("rate estimation needs at least two states on the path");

    EtaEstimate est;
    est.rates = init;
    if (nu == 1) {
        est.objective = eta_objective(est.rates, path, dt, cfg);
        return est;
    }

    for (std::size_t k = 0; k < nu; ++k) {
        std::vector<double> stay_dt;
        std::vector<std::vector<double>> switch_dt(nu);
        for (std::size_t i = 1; i < path.size(); ++i) {
            if (static_cast<std::size_t>(path.s[i - 1]) != k) continue;
            const auto to = static_cast<std::size_t>(path.s[i]);
            if (to == k)
                stay_dt.push_back(dt[i]);
            else
                switch_dt[to].push_back(dt[i]);
        }
        if (stay_dt.empty() && std::all_of(switch_dt.begin(), switch_dt.end(), [](const auto& v) { return v.empty(); }))
            continue;  // state never left from; keep the current rates

        if (nu == 2) {
            const std::size_t j = 1 - k;
            if (switch_dt[j].empty()) {
                est.rates(j, k) = kRateFloor;
                est.at_boundary = true;
                continue;
            }
            double stay_total = 0.0;
            for (double d : stay_dt) stay_total += d;
            auto slope = [&](double u) {
                const double eta = std::exp(u);
                double g = -stay_total;
                for (double d : switch_dt[j]) g += d / std::expm1(eta * d);
                return g * eta;
            };
            const double lo = std::log(kRateFloor), hi = std::log(kRateCeiling);
            if (slope(hi) >= 0.0) {
                est.rates(j, k) = kRateCeiling;
                est.at_boundary = true;
                continue;
            }
            if (slope(lo) <= 0.0) {
                est.rates(j, k) = kRateFloor;
                est.at_boundary = true;
                continue;
            }
            std::uintmax_t max_iter = 200;
            const auto root = boost::math::tools::toms748_solve(slope, lo, hi, boost::math::tools::eps_tolerance<double>(50),
                                                                max_iter);
            est.rates(j, k) = std::exp(0.5 * (root.first + root.second));
            continue;
        }

        // nu > 2: joint search over the rates out of k.
        std::vector<std::size_t> dests;
        for (std::size_t j = 0; j < nu; ++j)
            if (j != k) dests.push_back(j);
        auto objective = [&](std::span<const double> x) {
            double stay_log = 0.0;
            for (double d : stay_dt) {
                double stay = 2.0 - static_cast<double>(nu);
                for (std::size_t q = 0; q < dests.size(); ++q) stay += std::exp(-std::exp(x[q]) * d);
                if (!(stay > 0.0)) return kInf;
                stay_log += std::log(stay);
            }
            double sw = 0.0;
            for (std::size_t q = 0; q < dests.size(); ++q)
                for (double d : switch_dt[dests[q]]) sw += std::log(-std::expm1(-std::exp(x[q]) * d));
            return -(stay_log + sw);
        };
        std::vector<double> x0;
        for (std::size_t j : dests) x0.push_back(std::log(std::max(init(j, k), kRateFloor)));
        NelderMeadOptions opt;
        opt.step_tolerance = cfg.step_tolerance;
        opt.max_evaluations = cfg.max_evaluations;
        opt.lower.assign(dests.size(), std::log(kRateFloor));
        opt.upper.assign(dests.size(), std::log(kRateCeiling));
        const auto res = nelder_mead(objective, x0, opt);
        for (std::size_t q = 0; q < dests.size(); ++q) {
            est.rates(dests[q], k) = std::exp(res.x[q]);
            if (res.x[q] <= opt.lower[q] + 1e-9 || res.x[q] >= opt.upper[q] - 1e-9) est.at_boundary = true;
        }
    }
    est.objective = eta_objective(est.rates, path, dt, cfg);
    return est;
}

double joint_log_posterior(const RegimeParams& params, const TransitionRates& rates, const StatePath& path,
                           const DiffSeries& diff, double sigma2_0, const InferenceConfig& cfg) {
    return -neg_log_pseudo_likelihood(diff, path, params, rates, sigma2_0, cfg.rho_mode) + cfg.log_prior;
}

}  // namespace comsgarch
