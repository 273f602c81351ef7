#include "comsgarch/analysis.hpp"

#include "comsgarch/error.hpp"
#include "comsgarch/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/binomial.hpp>

namespace comsgarch {

namespace {

double log_sum_exp(const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// 0^0 = 1 so p = 0 gives weight 1 to the no-drop configuration
double power0(double base, int e) { return e == 0 ? 1.0 : std::pow(base, e); }

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    MeanSe r;
    const double n = static_cast<double>(v.size());
    for (double x : v) r.mean += x;
    r.mean /= n;
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - r.mean) * (x - r.mean);
        r.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return r;
}

}  // namespace

PathEnumeration::PathEnumeration(const DiffSeries& diff, const RegimeParams& params, const TransitionRates& rates,
                                 double sigma2_0, const InferenceConfig& cfg)
    : n_(diff.size()), nu_(params.states()) {
    diff.validate();
    params.validate();
    if (nu_ == 0 || n_ == 0) throw ValidationError("enumeration needs at least one state and one increment");
    double total = 1.0;
    for (std::size_t i = 0; i < n_; ++i) {
        total *= static_cast<double>(nu_);
        if (total > static_cast<double>(kMaxEnumeratedPaths))
            throw ValidationError("enumeration over " + std::to_string(nu_) + "^" + std::to_string(n_) +
                                  " paths exceeds the limit of " + std::to_string(kMaxEnumeratedPaths));
    }
    const auto count = static_cast<std::size_t>(total);
    log_post_.resize(count);
    for (std::size_t idx = 0; idx < count; ++idx)
        log_post_[idx] = joint_log_posterior(params, rates, path(idx), diff, sigma2_0, cfg);
}

StatePath PathEnumeration::path(std::size_t index) const {
    StatePath p;
    p.s.assign(n_, 0);
    for (std::size_t i = n_; i-- > 0;) {
        p.s[i] = static_cast<int>(index % nu_);
        index /= nu_;
    }
    return p;
}

std::size_t PathEnumeration::index_of(const StatePath& p) const {
    if (p.size() != n_) throw ValidationError("path length does not match the enumeration");
    p.validate(nu_);
    std::size_t idx = 0;
    for (int s : p.s) idx = idx * nu_ + static_cast<std::size_t>(s);
    return idx;
}

std::vector<double> PathEnumeration::probabilities() const {
    const double z = log_sum_exp(log_post_);
    std::vector<double> out(log_post_.size());
    for (std::size_t q = 0; q < out.size(); ++q) out[q] = std::exp(log_post_[q] - z);
    return out;
}

std::vector<double> PathEnumeration::conditional(std::size_t i, const StatePath& p) const {
    if (i >= n_) throw ValidationError("index outside the path");
    StatePath q = p;
    std::vector<double> lp(nu_);
    for (std::size_t k = 0; k < nu_; ++k) {
        q.s[i] = static_cast<int>(k);
        lp[k] = log_post_[index_of(q)];
    }
    const double z = log_sum_exp(lp);
    for (double& x : lp) x = std::exp(x - z);
    return lp;
}

std::vector<double> PathEnumeration::marginal(std::size_t i) const {
    if (i >= n_) throw ValidationError("index outside the path");
    const auto probs = probabilities();
    std::vector<double> out(nu_, 0.0);
    std::size_t stride = 1;
    for (std::size_t q = i + 1; q < n_; ++q) stride *= nu_;
    for (std::size_t idx = 0; idx < probs.size(); ++idx) out[(idx / stride) % nu_] += probs[idx];
    return out;
}

EnsembleWeight ensemble_weight(int k, int b, double p) {
    if (b < 1) throw ValidationError("pivotal window must be >= 1");
    if (k < b) throw ValidationError("k must be >= b");
    if (!(p >= 0.0 && p < 1.0)) throw ValidationError("NI rate must lie in [0,1)");
    EnsembleWeight w;
    w.count = boost::math::binomial_coefficient<double>(static_cast<unsigned>(k - 1), static_cast<unsigned>(b - 1));
    w.weight = power0(p, k - b) * power0(1.0 - p, b - 1);
    return w;
}

double negative_binomial_mass(int k, int b, double p) {
    const auto w = ensemble_weight(k, b, p);
    return w.count * w.weight * (1.0 - p);
}

std::vector<EnsembleRow> ensemble_table(const std::vector<int>& b_values, const std::vector<double>& p_values,
                                        int k_max) {
    std::vector<EnsembleRow> rows;
    for (int b : b_values)
        for (double p : p_values)
            for (int k = b; k <= k_max; ++k) {
                const auto w = ensemble_weight(k, b, p);
                rows.push_back({k, b, p, w.count, w.weight});
            }
    return rows;
}

StabilitySpan stability_ratio(const std::vector<double>& rho2_values) {
    if (rho2_values.size() < 2) throw ValidationError("a merged span holds at least two increments");
    double sum = 0.0, inv = 0.0;
    for (double r : rho2_values) {
        if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("increment variances must be positive");
        sum += r;
        inv += 1.0 / r;
    }
    StabilitySpan s;
    const double m = static_cast<double>(rho2_values.size());
    s.ni_term = m / (2.0 * sum);
    s.no_ni_term = 0.5 * inv;
    s.ratio = s.ni_term / s.no_ni_term;
    s.cross_product = sum * inv;
    return s;
}

StabilityOutcome stability_experiment(const DiffSeries& diff, const StatePath& path, const RegimeParams& params,
                                      double sigma2_0, RhoMode mode, const std::vector<char>& keep, double eps,
                                      int reps, std::uint64_t seed) {
    diff.validate();
    const std::size_t n = diff.size();
    if (keep.size() != n + 1) throw ValidationError("mask needs one flag per observed point");
    if (!keep.front() || !keep.back()) throw ValidationError("mask must keep the first and last point");
    if (!(eps > 0.0)) throw ValidationError("perturbation scale must be positive");
    if (reps < 2) throw ValidationError("need at least 2 replications");

    const auto vol = volatility_path(diff, path, params, sigma2_0, mode);

    // spans of zero-based increments [begin, end)
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t begin = 0;
    for (std::size_t point = 1; point <= n; ++point) {
        if (!keep[point]) continue;
        spans.emplace_back(begin, point);
        begin = point;
    }

    StabilityOutcome out;
    out.reps = reps;
    std::vector<double> span_rho2(spans.size()), span_y(spans.size());
    for (std::size_t j = 0; j < spans.size(); ++j) {
        std::vector<double> r(vol.rho2.begin() + static_cast<long>(spans[j].first),
                              vol.rho2.begin() + static_cast<long>(spans[j].second));
        if (r.size() == 1) {
            out.expected_ni += eps * eps / (2.0 * r[0]);
            out.expected_no_ni += eps * eps / (2.0 * r[0]);
        } else {
            const auto s = stability_ratio(r);
            out.expected_ni += eps * eps * s.ni_term;
            out.expected_no_ni += eps * eps * s.no_ni_term;
        }
        for (std::size_t i = spans[j].first; i < spans[j].second; ++i) {
            span_rho2[j] += vol.rho2[i];
            span_y[j] += diff.Y[i];
        }
    }

    Rng rng(seed);
    std::vector<double> z(n), d_ni(static_cast<std::size_t>(reps)), d_no(static_cast<std::size_t>(reps)),
        gap(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        for (double& x : z) x = eps * standard_normal(rng);
        double no = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = diff.Y[i];
            no += ((y + z[i]) * (y + z[i]) - y * y) / (2.0 * vol.rho2[i]);
        }
        double ni = 0.0;
        for (std::size_t j = 0; j < spans.size(); ++j) {
            double zs = 0.0;
            for (std::size_t i = spans[j].first; i < spans[j].second; ++i) zs += z[i];
            const double y = span_y[j];
            ni += ((y + zs) * (y + zs) - y * y) / (2.0 * span_rho2[j]);
        }
        const auto ru = static_cast<std::size_t>(r);
        d_no[ru] = no;
        d_ni[ru] = ni;
        gap[ru] = no - ni;
    }
    const auto a = mean_se(d_ni), b = mean_se(d_no), g = mean_se(gap);
    out.mean_ni = a.mean;
    out.se_ni = a.se;
    out.mean_no_ni = b.mean;
    out.se_no_ni = b.se;
    out.mean_gap = g.mean;
    out.se_gap = g.se;
    return out;
}

StabilityOutcome stability_experiment(const DiffSeries& diff, const StatePath& path, const RegimeParams& params,
                                      double sigma2_0, RhoMode mode, double p, double eps, int reps,
                                      std::uint64_t seed) {
    if (!(p >= 0.0 && p < 1.0)) throw ValidationError("NI rate must lie in [0,1)");
    const std::size_t n = diff.size();
    std::vector<char> keep(n + 1, 1);
    Rng rng(derive_seed(seed, {0xA5u}));
    for (std::size_t point = 2; point < n; ++point) keep[point] = uniform01(rng) >= p ? 1 : 0;
    return stability_experiment(diff, path, params, sigma2_0, mode, keep, eps, reps, seed);
}

double state_bias(const StatePath& truth, const std::vector<std::vector<double>>& frequencies) {
    if (truth.size() == 0 || truth.size() != frequencies.size())
        throw ValidationError("true path and frequency table must have equal non-zero length");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto k = static_cast<std::size_t>(truth.s[i]);
        if (truth.s[i] < 0 || k >= frequencies[i].size()) throw ValidationError("true state outside the table");
        sum += 1.0 - frequencies[i][k];
    }
    return sum / static_cast<double>(truth.size());
}

double state_bias(const StatePath& truth, const StatePath& predicted) {
    if (truth.size() == 0 || truth.size() != predicted.size())
        throw ValidationError("paths must have equal non-zero length");
    std::size_t miss = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) miss += truth.s[i] != predicted.s[i];
    return static_cast<double>(miss) / static_cast<double>(truth.size());
}

double vol_rel_bias(const std::vector<double>& true_sigma2, const std::vector<double>& est_sigma2,
                    std::size_t* excluded) {
    if (true_sigma2.empty() || true_sigma2.size() != est_sigma2.size())
        throw ValidationError("volatility series must have equal non-zero length");
    double sum = 0.0;
    std::size_t used = 0, skipped = 0;
    for (std::size_t i = 0; i < true_sigma2.size(); ++i) {
        if (!(true_sigma2[i] > 0.0)) {
            ++skipped;
            continue;
        }
        sum += std::abs(est_sigma2[i] - true_sigma2[i]) / true_sigma2[i];
        ++used;
    }
    if (excluded) *excluded = skipped;
    if (used == 0) throw ValidationError("no index with positive true volatility");
    return 100.0 * sum / static_cast<double>(used);
}

}  // namespace comsgarch
