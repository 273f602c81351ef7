#include "comsgarch/model.hpp"

#include "comsgarch/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

namespace comsgarch {

void rethrow_with_index(const DomainError& err, std::size_t index) {
    if (err.index()) throw err;
    throw DomainError(std::string(err.what()) + " (at index " + std::to_string(index) + ")", index);
}

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

void check_state(int state, std::size_t nu) {
    if (state < 0 || static_cast<std::size_t>(state) >= nu)
        throw ValidationError("state label " + std::to_string(state) + " outside 0.." + std::to_string(nu) + "-1");
}

// expm1(x)/x and (expm1(x) - x)/x^2, both analytic at x = 0.
double phi1(double x) {
    if (std::abs(x) < 0.5) {
        double term = 1.0, sum = 1.0;
        for (int k = 1; k < 30; ++k) {
            term *= x / (k + 1);
            sum += term;
        }
        return sum;
    }
    return std::expm1(x) / x;
}

double phi2(double x) {
    if (std::abs(x) < 0.5) {
        double term = 0.5, sum = 0.5;
        for (int k = 1; k < 30; ++k) {
            term *= x / (k + 2);
            sum += term;
        }
        return sum;
    }
    return (std::expm1(x) - x) / (x * x);
}

}  // namespace

void ObservedSeries::validate() const {
    if (t.size() != G.size())
        throw ValidationError("timestamps and levels differ in length (" + std::to_string(t.size()) + " vs " +
                              std::to_string(G.size()) + ")");
    if (t.size() < 2) throw ValidationError("a series needs at least 2 points");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i]) || !std::isfinite(G[i]))
            throw ValidationError("non-finite value at index " + std::to_string(i));
        if (i > 0 && !(t[i] > t[i - 1]))
            throw ValidationError("timestamps not strictly increasing at index " + std::to_string(i));
    }
}

void DiffSeries::validate() const {
    if (Y.size() != dt.size()) throw ValidationError("increments and gaps differ in length");
    for (std::size_t i = 0; i < dt.size(); ++i) {
        if (!(dt[i] > 0.0) || !std::isfinite(dt[i]))
            throw ValidationError("gap at index " + std::to_string(i) + " is not positive");
        if (!std::isfinite(Y[i])) throw ValidationError("non-finite increment at index " + std::to_string(i));
    }
}

void RegimeParams::validate() const {
    if (alpha.empty()) throw ValidationError("regime parameters need at least one state");
    if (beta.size() != alpha.size() || lambda.size() != alpha.size())
        throw ValidationError("alpha, beta and lambda must have one entry per state");
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        if (!(alpha[k] > 0.0) || !(beta[k] > 0.0) || !(lambda[k] > 0.0) || !std::isfinite(alpha[k]) ||
            !std::isfinite(beta[k]) || !std::isfinite(lambda[k]))
            throw ValidationError("regime parameters of state " + std::to_string(k) + " must be positive and finite");
    }
}

TransitionRates::TransitionRates(std::size_t nu, double rate) : nu_(nu), eta_(nu * nu, rate) {
    for (std::size_t k = 0; k < nu; ++k) eta_[k * nu + k] = 0.0;
}

void TransitionRates::validate() const {
    if (nu_ == 0) throw ValidationError("transition rates need at least one state");
    for (std::size_t j = 0; j < nu_; ++j)
        for (std::size_t k = 0; k < nu_; ++k)
            if (j != k && (!(eta_[j * nu_ + k] >= 0.0) || !std::isfinite(eta_[j * nu_ + k])))
                throw ValidationError("transition rate must be finite and non-negative");
}

void StatePath::validate(std::size_t nu) const {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] < 0 || static_cast<std::size_t>(s[i]) >= nu)
            throw ValidationError("state at index " + std::to_string(i) + " outside the state range");
    }
}

void PivotalWindow::validate() const {
    if (b < 1) throw ValidationError("pivotal window b must be >= 1");
}

DiffSeries diff_series(const ObservedSeries& obs) {
    obs.validate();
    DiffSeries d;
    const std::size_t n = obs.size() - 1;
    d.Y.resize(n);
    d.dt.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.Y[i] = obs.G[i + 1] - obs.G[i];
        d.dt[i] = obs.t[i + 1] - obs.t[i];
    }
    return d;
}

double sigma2_next(double sigma2_prev, double y2, double dt, const RegimeParams& params, int state) {
    if (!(sigma2_prev > 0.0)) throw DomainError("previous variance must be positive");
    if (!(dt > 0.0)) throw DomainError("time gap must be positive");
    check_state(state, params.states());
    const auto k = static_cast<std::size_t>(state);
    return params.alpha[k] * dt + (sigma2_prev + params.lambda[k] * y2) * std::exp(-params.beta[k] * dt);
}

double transition_prob(int from, int to, double dt, const TransitionRates& rates) {
    if (!(dt > 0.0)) throw DomainError("time gap must be positive");
    const std::size_t nu = rates.states();
    check_state(from, nu);
    check_state(to, nu);
    const auto k = static_cast<std::size_t>(from);
    if (from != to) return -std::expm1(-rates(static_cast<std::size_t>(to), k) * dt);

    double stay = 2.0 - static_cast<double>(nu);
    for (std::size_t j = 0; j < nu; ++j)
        if (j != k) stay += std::exp(-rates(j, k) * dt);
    if (nu == 1) stay = 1.0;
    if (stay < 0.0 || stay > 1.0) {
        std::ostringstream msg;
        msg << "stay probability " << stay << " outside [0,1] for state " << from << " and gap " << dt;
        throw DomainError(msg.str());
    }
    return stay;
}

double rho2_exact(double sigma2_prev, double dt, const RegimeParams& params, int state) {
    if (!(sigma2_prev > 0.0)) throw DomainError("previous variance must be positive");
    if (!(dt > 0.0)) throw DomainError("time gap must be positive");
    check_state(state, params.states());
    const auto k = static_cast<std::size_t>(state);
    const double x = (params.beta[k] - params.lambda[k]) * dt;
    const double r = sigma2_prev * dt * phi1(x) - params.alpha[k] * dt * dt * phi2(x);
    if (!(r > 0.0) || !std::isfinite(r)) {
        std::ostringstream msg;
        msg << "exact increment variance " << r << " is not positive for state " << state << " and gap " << dt;
        throw DomainError(msg.str());
    }
    return r;
}

double rho2_approx(double sigma2_prev, double dt) {
    if (!(sigma2_prev > 0.0)) throw DomainError("previous variance must be positive");
    if (!(dt > 0.0)) throw DomainError("time gap must be positive");
    return sigma2_prev * dt;
}

double rho2(RhoMode mode, double sigma2_prev, double dt, const RegimeParams& params, int state) {
    return mode == RhoMode::exact ? rho2_exact(sigma2_prev, dt, params, state) : rho2_approx(sigma2_prev, dt);
}

VolatilitySeries volatility_path(const DiffSeries& diff, const StatePath& path, const RegimeParams& params,
                                 double sigma2_0, RhoMode mode) {
    if (path.size() != diff.size()) throw ValidationError("path and series differ in length");
    if (!(sigma2_0 > 0.0)) throw ValidationError("initial variance must be positive");
    VolatilitySeries v;
    v.sigma2_0 = sigma2_0;
    v.sigma2.resize(diff.size());
    v.rho2.resize(diff.size());
    double prev = sigma2_0;
    for (std::size_t i = 0; i < diff.size(); ++i) {
        try {
            v.rho2[i] = rho2(mode, prev, diff.dt[i], params, path.s[i]);
            prev = v.sigma2[i] = sigma2_next(prev, diff.Y[i] * diff.Y[i], diff.dt[i], params, path.s[i]);
        } catch (const DomainError& e) {
            rethrow_with_index(e, i);
        }
    }
    return v;
}

double gaussian_nll(const DiffSeries& diff, const StatePath& path, const RegimeParams& params, double sigma2_0,
                    RhoMode mode) {
    if (path.size() != diff.size()) throw ValidationError("path and series differ in length");
    double prev = sigma2_0;
    double total = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i) {
        try {
            const double y2 = diff.Y[i] * diff.Y[i];
            const double r = rho2(mode, prev, diff.dt[i], params, path.s[i]);
            total += kHalfLogTwoPi + 0.5 * std::log(r) + y2 / (2.0 * r);
            prev = sigma2_next(prev, y2, diff.dt[i], params, path.s[i]);
        } catch (const DomainError& e) {
            rethrow_with_index(e, i);
        }
    }
    return total;
}

double transition_nll(std::span<const double> dt, const StatePath& path, const TransitionRates& rates) {
    if (path.size() != dt.size()) throw ValidationError("path and gaps differ in length");
    double total = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        double xi = 0.0;
        try {
            xi = transition_prob(path.s[i - 1], path.s[i], dt[i], rates);
        } catch (const DomainError& e) {
            rethrow_with_index(e, i);
        }
        if (!(xi > 0.0)) throw DomainError("transition probability is zero", i);
        total -= std::log(xi);
    }
    return total;
}

double neg_log_pseudo_likelihood(const DiffSeries& diff, const StatePath& path, const RegimeParams& params,
                                 const TransitionRates& rates, double sigma2_0, RhoMode mode) {
    return gaussian_nll(diff, path, params, sigma2_0, mode) + transition_nll(diff.dt, path, rates);
}

double default_sigma2_0(const DiffSeries& diff) {
    const std::size_t n = diff.size();
    if (n == 0) throw ValidationError("empty series");
    const double mean_y = std::accumulate(diff.Y.begin(), diff.Y.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double y : diff.Y) ss += (y - mean_y) * (y - mean_y);
    const double var = n > 1 ? ss / static_cast<double>(n - 1) : diff.Y[0] * diff.Y[0];
    const double mean_dt = std::accumulate(diff.dt.begin(), diff.dt.end(), 0.0) / static_cast<double>(n);
    return std::max(var / mean_dt, kParamFloor);
}

}  // namespace comsgarch
