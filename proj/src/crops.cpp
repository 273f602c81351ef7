#include "comsgarch/crops.hpp"

#include "comsgarch/error.hpp"
#include "comsgarch/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

namespace comsgarch {

void CropsConfig::validate() const {
    if (iterations < 1) throw ValidationError("CROPS needs at least one iteration");
    if (paths < 1) throw ValidationError("CROPS needs at least one candidate path per iteration");
    if (!(p >= 0.0 && p < 1.0)) throw ValidationError("NI rate must lie in [0,1)");
    if (posterior_window < 1) throw ValidationError("posterior window must be >= 1");
    if (sigma2_0 && !(*sigma2_0 > 0.0)) throw ValidationError("initial variance must be positive");
    if (early_stop_span < 1) throw ValidationError("early-stop span must be >= 1");
    if (threads < 1) throw ValidationError("thread count must be >= 1");
    if (init_sweeps < 0) throw ValidationError("initial sweep count must be >= 0");
    inference.validate();
}

NoiseInjection apply_mask(const ObservedSeries& obs, std::vector<char> keep, double p) {
    obs.validate();
    if (keep.size() != obs.size()) throw ValidationError("mask length differs from the series length");
    if (!keep.front() || !keep.back()) throw ValidationError("mask must keep both endpoints");

    NoiseInjection out;
    out.mask.p = p;
    std::size_t prev = 0;
    for (std::size_t i = 1; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        out.mask.kept_points.push_back(i);
        out.diff.Y.push_back(obs.G[i] - obs.G[prev]);
        out.diff.dt.push_back(obs.t[i] - obs.t[prev]);
        prev = i;
    }
    out.mask.keep = std::move(keep);
    return out;
}

NoiseInjection bernoulli_ni(const ObservedSeries& obs, double p, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ValidationError("NI rate must lie in [0,1)");
    const std::size_t npts = obs.size();
    if (npts < 3) throw ValidationError("noise injection needs at least three points");
    std::vector<char> keep(npts, 1);
    // points 0, 1 and n anchor the sub-series
    for (std::size_t i = 2; i + 1 < npts; ++i) keep[i] = uniform01(rng) >= p ? 1 : 0;
    return apply_mask(obs, std::move(keep), p);
}

CropsInit default_init(const DiffSeries& diff, std::size_t nu, Rng& rng) {
    if (nu < 1) throw ValidationError("need at least one state");
    const double mean_dt = std::accumulate(diff.dt.begin(), diff.dt.end(), 0.0) / static_cast<double>(diff.size());
    std::vector<double> c(nu);
    for (std::size_t k = 0; k < nu; ++k) c[k] = std::pow(0.5, static_cast<double>(nu - k));
    CropsInit init;
    init.params = balanced_params(1.0 / mean_dt, c, BalanceFamily::cogarch);
    init.rates = TransitionRates(nu, 0.1);
    init.path.s.resize(diff.size());
    for (int& s : init.path.s) s = static_cast<int>(std::min<double>(uniform01(rng) * static_cast<double>(nu), nu - 1));
    return init;
}

namespace {

StatePath restrict_path(const StatePath& path, const NoiseMask& mask) {
    StatePath sub;
    sub.s.reserve(mask.kept_count());
    for (std::size_t pt : mask.kept_points) sub.s.push_back(path.s[pt - 1]);
    return sub;
}

std::vector<double> flatten(const RegimeParams& params, const TransitionRates& rates) {
    std::vector<double> v;
    for (std::size_t k = 0; k < params.states(); ++k) {
        v.push_back(params.alpha[k]);
        v.push_back(params.beta[k]);
        v.push_back(params.lambda[k]);
    }
    for (std::size_t j = 0; j < rates.states(); ++j)
        for (std::size_t k = 0; k < rates.states(); ++k)
            if (j != k) v.push_back(rates(j, k));
    return v;
}

struct Candidate {
    StatePath path;
    double score = -std::numeric_limits<double>::infinity();
    std::exception_ptr error;
};

void run_parallel(int threads, std::size_t count, const std::function<void(std::size_t)>& job) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t j = 0; j < count; ++j) job(j);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t j = w; j < count; j += workers) job(j);
        });
}

}  // namespace

void canonicalize_labels(CropsResult& result) {
    const std::size_t nu = result.params.states();
    if (nu < 2 || result.path.size() == 0) return;
    std::vector<double> sum(nu, 0.0);
    std::vector<std::size_t> cnt(nu, 0);
    for (std::size_t i = 0; i < result.path.size(); ++i) {
        const auto k = static_cast<std::size_t>(result.path.s[i]);
        sum[k] += result.volatility.sigma2[i];
        ++cnt[k];
    }
    // thinly occupied regimes carry no reliable level; they keep their labels
    const double min_count = kCanonicalMinShare * static_cast<double>(result.path.size());
    std::vector<std::size_t> slots;
    for (std::size_t k = 0; k < nu; ++k)
        if (static_cast<double>(cnt[k]) >= min_count) slots.push_back(k);
    std::vector<std::size_t> ranked = slots;
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        return sum[a] / static_cast<double>(cnt[a]) < sum[b] / static_cast<double>(cnt[b]);
    });
    std::vector<std::size_t> order(nu);  // order[new] = old
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t q = 0; q < slots.size(); ++q) order[slots[q]] = ranked[q];
    std::vector<int> relabel(nu);  // relabel[old] = new
    for (std::size_t nk = 0; nk < nu; ++nk) relabel[order[nk]] = static_cast<int>(nk);
    if (std::is_sorted(order.begin(), order.end())) return;

    RegimeParams p;
    TransitionRates r(nu);
    for (std::size_t nk = 0; nk < nu; ++nk) {
        p.alpha.push_back(result.params.alpha[order[nk]]);
        p.beta.push_back(result.params.beta[order[nk]]);
        p.lambda.push_back(result.params.lambda[order[nk]]);
        for (std::size_t nj = 0; nj < nu; ++nj)
            if (nj != nk) r(nj, nk) = result.rates(order[nj], order[nk]);
    }
    result.params = std::move(p);
    result.rates = std::move(r);
    for (int& s : result.path.s) s = relabel[static_cast<std::size_t>(s)];
    for (auto& row : result.state_frequency) {
        std::vector<double> old = row;
        for (std::size_t nk = 0; nk < nu; ++nk) row[nk] = old[order[nk]];
    }
}

CropsResult run_crops(const ObservedSeries& obs, std::size_t nu, const CropsConfig& cfg,
                      const std::optional<CropsInit>& init) {
    cfg.validate();
    if (nu < 1) throw ValidationError("need at least one state");
    const DiffSeries diff = diff_series(obs);
    const std::size_t n = diff.size();
    const double sigma2_0 = cfg.sigma2_0.value_or(default_sigma2_0(diff));

    Rng init_rng(derive_seed(cfg.seed, {0}));
    CropsInit start = init ? *init : default_init(diff, nu, init_rng);
    start.params.validate();
    start.rates.validate();
    if (start.params.states() != nu || start.rates.states() != nu)
        throw ValidationError("initial values disagree with the requested state count");
    if (start.path.size() != n) throw ValidationError("initial path length differs from the series");
    start.path.validate(nu);

    CropsResult result;
    result.sigma2_0 = sigma2_0;
    StatePath path = std::move(start.path);
    RegimeParams params = std::move(start.params);
    TransitionRates rates = std::move(start.rates);

    // sweeps under the starting parameters give the first MAP step a path that
    // already separates the regimes
    if (nu > 1 && !init) {
        Rng warm_rng(derive_seed(cfg.seed, {3}));
        for (int w = 0; w < cfg.init_sweeps; ++w)
            path = gibbs_sweep(std::move(path), params, rates, diff, sigma2_0, cfg.inference, warm_rng, 0, n - 1);
    }

    Rng ni_rng(derive_seed(cfg.seed, {1}));
    std::deque<StatePath> window;
    std::deque<std::vector<double>> history;
    int consecutive_failures = 0;

    for (int l = 1; l <= cfg.iterations; ++l) {
        IterationRecord rec;
        rec.iteration = l;
        for (int attempt = 0;; ++attempt) {
            try {
                const NoiseInjection ni = bernoulli_ni(obs, cfg.p, ni_rng);
                const StatePath sub_path = restrict_path(path, ni.mask);
                const ThetaEstimate theta = map_theta(sub_path, ni.diff, sigma2_0, cfg.inference, params);
                const TransitionRates new_rates =
                    nu > 1 ? map_eta(sub_path, ni.diff.dt, cfg.inference, rates).rates : rates;

                std::vector<Candidate> cands(nu > 1 ? static_cast<std::size_t>(cfg.paths) : 1);
                const std::size_t sub_n = ni.diff.size();
                run_parallel(cfg.threads, cands.size(), [&](std::size_t j) {
                    try {
                        Rng rng(derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(l),
                                                       static_cast<std::uint64_t>(attempt), j}));
                        cands[j].path = nu > 1 ? gibbs_sweep(sub_path, theta.params, new_rates, ni.diff, sigma2_0,
                                                             cfg.inference, rng, 0, sub_n - 1)
                                               : sub_path;
                        cands[j].score =
                            joint_log_posterior(theta.params, new_rates, cands[j].path, ni.diff, sigma2_0, cfg.inference);
                    } catch (...) {
                        cands[j].error = std::current_exception();
                    }
                });
                for (const auto& c : cands)
                    if (c.error) std::rethrow_exception(c.error);

                std::size_t best = 0;
                for (std::size_t j = 1; j < cands.size(); ++j)
                    if (cands[j].score > cands[best].score) best = j;
                for (const auto& c : cands)
                    if (c.score > cands[best].score) throw DomainError("optimal-path selection invariant violated");
                if (!std::isfinite(cands[best].score)) throw DomainError("winning candidate has non-finite score");

                for (std::size_t q = 0; q < ni.mask.kept_count(); ++q)
                    path.s[ni.mask.kept_points[q] - 1] = cands[best].path.s[q];
                params = theta.params;
                rates = new_rates;

                rec.objective = cands[best].score;
                rec.theta_objective = theta.objective;
                rec.theta_converged = theta.converged;
                rec.kept = ni.mask.kept_count();
                if (!theta.converged) result.optimizer_warning = true;
                consecutive_failures = 0;
                break;
            } catch (const DomainError& e) {
                ++consecutive_failures;
                if (attempt >= 1 || consecutive_failures >= 2)
                    throw DomainError("CROPS iteration " + std::to_string(l) +
                                      " failed twice in a row; last error: " + e.what());
                rec.error = e.what();
            }
        }
        rec.params = params;
        rec.rates = rates;
        if (cfg.trace) result.trace.push_back(rec);
        result.iterations_run = l;

        window.push_back(path);
        if (window.size() > static_cast<std::size_t>(cfg.posterior_window)) window.pop_front();

        if (cfg.early_stop) {
            history.push_back(flatten(params, rates));
            if (history.size() > static_cast<std::size_t>(cfg.early_stop_span)) {
                const auto& old = history.front();
                const auto& now = history.back();
                double change = 0.0;
                for (std::size_t q = 0; q < now.size(); ++q)
                    change = std::max(change, std::abs(now[q] - old[q]) / std::max(std::abs(old[q]), 1e-300));
                history.pop_front();
                if (change < cfg.early_stop_tolerance) break;
            }
        }
    }

    result.state_frequency.assign(n, std::vector<double>(nu, 0.0));
    for (const auto& w : window)
        for (std::size_t i = 0; i < n; ++i) result.state_frequency[i][static_cast<std::size_t>(w.s[i])] += 1.0;
    for (auto& row : result.state_frequency)
        for (double& f : row) f /= static_cast<double>(window.size());

    result.path = std::move(path);
    result.params = std::move(params);
    result.rates = std::move(rates);
    result.volatility = volatility_path(diff, result.path, result.params, sigma2_0, cfg.inference.rho_mode);
    if (cfg.canonical_labels) canonicalize_labels(result);
    return result;
}

}  // namespace comsgarch
