#include "comsgarch/simulator.hpp"

#include "comsgarch/error.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace comsgarch {

InnovationSource gaussian_innovation() {
    return [](Rng& rng) { return standard_normal(rng); };
}

void SimConfig::validate(std::size_t nu) const {
    if (n < 2) throw ValidationError("simulation length must be >= 2");
    if (!(zeta > 0.0) || !std::isfinite(zeta)) throw ValidationError("Poisson rate zeta must be positive");
    if (rates.states() != nu) throw ValidationError("transition rates and regime parameters disagree on state count");
    rates.validate();
    if (initial_state < 0 || static_cast<std::size_t>(initial_state) >= nu)
        throw ValidationError("initial state outside the state range");
    if (!innovation) throw ValidationError("no innovation source");
}

RegimeParams balanced_params(double zeta, const std::vector<double>& c, BalanceFamily family) {
    if (!(zeta > 0.0)) throw ValidationError("zeta must be positive");
    if (c.empty()) throw ValidationError("need at least one balance constant");
    RegimeParams p;
    for (double ck : c) {
        if (!(ck > 0.0 && ck < 1.0)) throw DomainError("balance constant must lie in (0,1), got " + std::to_string(ck));
        p.alpha.push_back(ck * zeta);
        p.beta.push_back(-std::log(ck) * zeta);
        p.lambda.push_back(family == BalanceFamily::cogarch ? ck * zeta : zeta);
    }
    p.validate();
    return p;
}

Simulation simulate(const SimConfig& config, const RegimeParams& params) {
    params.validate();
    config.validate(params.states());
    const std::size_t nu = params.states();

    Rng rng(config.seed);
    auto draw_gap = [&]() {
        if (config.gaps == GapMode::fixed) return 1.0 / config.zeta;
        double u = uniform01(rng);
        while (u <= 0.0) u = uniform01(rng);
        return -std::log(u) / config.zeta;
    };

    std::vector<double> probs(nu);
    auto draw_state = [&](int from, double dt) {
        for (std::size_t j = 0; j < nu; ++j) probs[j] = transition_prob(from, static_cast<int>(j), dt, config.rates);
        return draw_categorical(probs, rng);
    };

    int state = config.initial_state;
    const auto k0 = static_cast<std::size_t>(state);
    const double mean_gap = 1.0 / config.zeta;
    double sigma2 = params.alpha[k0] * mean_gap / -std::expm1(-params.beta[k0] * mean_gap);

    auto step = [&](double dt, double& y, double& rho) {
        state = draw_state(state, dt);
        rho = rho2(config.rho_mode, sigma2, dt, params, state);
        y = std::sqrt(rho) * config.innovation(rng);
        sigma2 = sigma2_next(sigma2, y * y, dt, params, state);
    };

    for (std::size_t i = 0; i < config.burn_in; ++i) {
        double y = 0.0, rho = 0.0;
        step(draw_gap(), y, rho);
    }

    Simulation sim;
    sim.volatility.sigma2_0 = sigma2;
    sim.diff.Y.resize(config.n);
    sim.diff.dt.resize(config.n);
    sim.path.s.resize(config.n);
    sim.volatility.sigma2.resize(config.n);
    sim.volatility.rho2.resize(config.n);
    for (std::size_t i = 0; i < config.n; ++i) {
        const double dt = draw_gap();
        try {
            step(dt, sim.diff.Y[i], sim.volatility.rho2[i]);
        } catch (const DomainError& e) {
            rethrow_with_index(e, i);
        }
        sim.diff.dt[i] = dt;
        sim.path.s[i] = state;
        sim.volatility.sigma2[i] = sigma2;
    }
    sim.observed = integrate(sim.diff);
    return sim;
}

ObservedSeries integrate(const DiffSeries& diff, double t0, double G0) {
    ObservedSeries obs;
    obs.t.reserve(diff.size() + 1);
    obs.G.reserve(diff.size() + 1);
    obs.t.push_back(t0);
    obs.G.push_back(G0);
    for (std::size_t i = 0; i < diff.size(); ++i) {
        obs.t.push_back(obs.t.back() + diff.dt[i]);
        obs.G.push_back(obs.G.back() + diff.Y[i]);
    }
    return obs;
}

namespace {

double sample_sd(const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

DiffSeries perturb(const DiffSeries& diff, const StatePath& path, double eps_scale, PerturbMode mode,
                   std::uint64_t seed) {
    if (!(eps_scale >= 0.0)) throw ValidationError("perturbation scale must be non-negative");
    if (path.size() != diff.size()) throw ValidationError("path and series differ in length");
    if (diff.size() < 2) throw ValidationError("need at least 2 increments to estimate a dispersion");

    std::vector<double> scale(diff.size());
    if (mode == PerturbMode::global_sd) {
        const double sd = sample_sd(diff.Y);
        std::fill(scale.begin(), scale.end(), eps_scale * sd);
    } else {
        int max_state = 0;
        for (int s : path.s) max_state = std::max(max_state, s);
        std::vector<std::vector<double>> by_state(static_cast<std::size_t>(max_state) + 1);
        for (std::size_t i = 0; i < diff.size(); ++i) by_state[static_cast<std::size_t>(path.s[i])].push_back(diff.Y[i]);
        std::vector<double> sd(by_state.size(), 0.0);
        for (std::size_t k = 0; k < by_state.size(); ++k) {
            if (by_state[k].empty()) continue;
            if (by_state[k].size() < 2)
                throw ValidationError("state " + std::to_string(k) + " has fewer than 2 observations");
            sd[k] = sample_sd(by_state[k]);
        }
        for (std::size_t i = 0; i < diff.size(); ++i) scale[i] = eps_scale * sd[static_cast<std::size_t>(path.s[i])];
    }

    DiffSeries out = diff;
    if (eps_scale == 0.0) return out;
    Rng rng(seed);
    for (std::size_t i = 0; i < out.size(); ++i) out.Y[i] += scale[i] * standard_normal(rng);
    return out;
}

}  // namespace comsgarch
