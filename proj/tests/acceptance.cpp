// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "comsgarch/analysis.hpp"
#include "comsgarch/crops.hpp"
#include "comsgarch/forecast.hpp"
#include "comsgarch/inference.hpp"
#include "comsgarch/simulator.hpp"
#include "comsgarch/tuning.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace comsgarch;
namespace fs = std::filesystem;

namespace {

// pinned tolerances
constexpr double kOracleTol = 1e-10;
constexpr double kHalvingLo = 2.0 * 0.7, kHalvingHi = 2.0 * 1.3;
constexpr double kStabilitySe = 3.0;
constexpr double kVolBiasMax = 15.0;  // percent
constexpr double kForecastTol = 1e-12;
constexpr double kConservationRel = 1e-12;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

/// Log joint density written out term by term in long double, flat priors.
long double oracle_log_joint(const DiffSeries& d, const StatePath& path, const RegimeParams& p,
                             const TransitionRates& rates, double sigma2_0) {
    const long double pi = 3.14159265358979323846264338327950288L;
    long double sigma2 = sigma2_0, total = 0.0L;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const int s = path.s[i];
        const long double dt = d.dt[i], y = d.Y[i];
        const long double r2 = sigma2 * dt;
        total += -0.5L * std::log(2.0L * pi * r2) - y * y / (2.0L * r2);
        if (i > 0) {
            const int from = path.s[i - 1];
            const long double sw = 1.0L - std::exp(-static_cast<long double>(rates(1 - from, from)) * dt);
            total += std::log(from == s ? 1.0L - sw : sw);
        }
        sigma2 = p.alpha[s] * dt + (sigma2 + p.lambda[s] * y * y) * std::exp(-static_cast<long double>(p.beta[s]) * dt);
    }
    return total;
}

Outcome oracle_equivalence() {
    constexpr std::size_t n = 8;
    double worst = 0.0;
    int rank_mismatch = 0;
    for (std::uint64_t inst = 0; inst < 50; ++inst) {
        Rng rng(derive_seed(1001, {inst}));
        auto u = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
        RegimeParams params{{u(0.5, 2.0), u(0.5, 3.0)}, {u(5.0, 25.0), u(5.0, 25.0)}, {u(0.5, 10.0), u(0.5, 10.0)}};
        TransitionRates rates(2, 0.1);
        rates(1, 0) = u(0.05, 2.0);
        rates(0, 1) = u(0.05, 2.0);
        DiffSeries d;
        StatePath path;
        for (std::size_t i = 0; i < n; ++i) {
            d.dt.push_back(u(0.05, 0.2));
            d.Y.push_back(0.1 * standard_normal(rng));
            path.s.push_back(uniform01(rng) < 0.5 ? 0 : 1);
        }
        const double sigma2_0 = u(0.05, 0.5);
        InferenceConfig cfg;
        cfg.pivotal.b = static_cast<int>(n);

        const PathEnumeration e(d, params, rates, sigma2_0, cfg);
        std::vector<long double> oracle(e.count());
        for (std::size_t j = 0; j < e.count(); ++j) oracle[j] = oracle_log_joint(d, e.path(j), params, rates, sigma2_0);

        for (std::size_t i = 0; i < n; ++i) {
            const auto got = state_conditional(i, path, params, rates, d, sigma2_0, cfg);
            const auto enumer = e.conditional(i, path);
            StatePath a = path, b = path;
            a.s[i] = 0;
            b.s[i] = 1;
            const long double la = oracle[e.index_of(a)], lb = oracle[e.index_of(b)];
            const double p0 = static_cast<double>(1.0L / (1.0L + std::exp(lb - la)));
            worst = std::max({worst, std::abs(got[0] - enumer[0]), std::abs(got[0] - p0), std::abs(got[1] - enumer[1])});
        }

        std::vector<std::size_t> by_post(e.count()), by_oracle(e.count());
        std::iota(by_post.begin(), by_post.end(), 0);
        std::iota(by_oracle.begin(), by_oracle.end(), 0);
        std::vector<double> post(e.count());
        for (std::size_t j = 0; j < e.count(); ++j) post[j] = joint_log_posterior(params, rates, e.path(j), d, sigma2_0, cfg);
        std::sort(by_post.begin(), by_post.end(), [&](auto x, auto y) { return post[x] > post[y]; });
        std::sort(by_oracle.begin(), by_oracle.end(), [&](auto x, auto y) { return oracle[x] > oracle[y]; });
        rank_mismatch += by_post != by_oracle;
    }
    return {worst <= kOracleTol && rank_mismatch == 0,
            "max conditional error " + fmt(worst) + ", ranking mismatches " + std::to_string(rank_mismatch) + "/50"};
}

Outcome rho_convergence() {
    bool ok = true;
    std::string detail;
    for (double d : {1.0, -1.0, 0.1, -0.1}) {
        // alpha != sigma2 * d keeps the first-order error term nonzero
        const RegimeParams p{{0.5}, {2.0 + d}, {2.0}};
        std::vector<double> err;
        for (double dt : {0.2, 0.1, 0.05}) {
            const double exact = rho2_exact(1.0, dt, p, 0);
            err.push_back(std::abs(rho2_approx(1.0, dt) - exact) / exact);
        }
        const double f1 = err[0] / err[1], f2 = err[1] / err[2];
        ok = ok && f1 >= kHalvingLo && f1 <= kHalvingHi && f2 >= kHalvingLo && f2 <= kHalvingHi;
        detail += "d=" + fmt(d) + ": " + fmt(f1) + "," + fmt(f2) + " ";
    }
    detail.pop_back();
    return {ok, "halving factors " + detail};
}

Outcome stability() {
    Rng rng(31);
    int violations = 0;
    for (int i = 0; i < 10000; ++i) {
        const double a = std::exp(8.0 * uniform01(rng) - 4.0), b = std::exp(8.0 * uniform01(rng) - 4.0);
        const double r = 2.0 * a * b / ((a + b) * (a + b));
        violations += !(r < 1.0) || std::abs(stability_ratio({a, b}).ratio - r) > 1e-12 * r;
    }
    SimConfig sc;
    sc.n = 300;
    sc.seed = 6;
    sc.rates = TransitionRates(2, 0.1);
    const auto params = balanced_params(10.0, {0.1, 0.25}, BalanceFamily::comsgarch);
    const auto sim = simulate(sc, params);
    const auto mc =
        stability_experiment(sim.diff, sim.path, params, sim.volatility.sigma2_0, RhoMode::approx, 0.3, 0.1, 10000, 9);
    const bool mc_ok = mc.mean_ni < mc.mean_no_ni && mc.mean_gap >= kStabilitySe * mc.se_gap;
    return {violations == 0 && mc_ok, "pair violations " + std::to_string(violations) + "/10000, NI " +
                                          fmt(mc.mean_ni) + " vs no-NI " + fmt(mc.mean_no_ni) + ", gap/se " +
                                          fmt(mc.mean_gap / mc.se_gap)};
}

Outcome ensemble() {
    int mismatches = 0;
    for (double p : {0.0, 0.01, 0.02, 0.1, 0.3, 0.49, 0.7}) {
        for (int b = 1; b <= 5; ++b) {
            for (int k = b; k <= 12; ++k) {
                double count = 0.0;
                for (unsigned mask = 0; mask < (1u << (k - 1)); ++mask) count += __builtin_popcount(mask) == b - 1;
                const auto w = ensemble_weight(k, b, p);
                const double weight = (k == b ? 1.0 : std::pow(p, k - b)) * (b == 1 ? 1.0 : std::pow(1.0 - p, b - 1));
                mismatches += w.count != count || w.weight != weight;
            }
        }
    }
    // table shape: counts non-decreasing in k, weights shrink by p per step
    int shape = 0;
    const auto table = ensemble_table({1, 2, 3, 5}, {0.01, 0.1, 0.3}, 20);
    for (std::size_t q = 1; q < table.size(); ++q) {
        const auto &prev = table[q - 1], &cur = table[q];
        if (cur.b != prev.b || cur.p != prev.p) continue;
        shape += cur.count < prev.count || std::abs(cur.weight - prev.weight * cur.p) > 1e-15 * prev.weight;
        if (cur.b > 1 && cur.k > cur.b + 1) shape += cur.count <= prev.count;
    }
    return {mismatches == 0 && shape == 0,
            "count/weight mismatches " + std::to_string(mismatches) + ", shape violations " + std::to_string(shape)};
}

Outcome simulation_one() {
    std::vector<double> bias;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SimConfig sc;
        sc.n = 500;
        sc.zeta = 10.0;
        sc.seed = seed;
        const auto sim = simulate(sc, balanced_params(10.0, {0.1}, BalanceFamily::cogarch));
        CropsConfig cfg;
        cfg.iterations = 300;
        cfg.seed = seed;
        const auto fit = run_crops(sim.observed, 1, cfg);
        bias.push_back(vol_rel_bias(sim.volatility.sigma2, fit.volatility.sigma2));
        detail += fmt(bias.back()) + " ";
    }
    detail.pop_back();
    const double med = median(bias);
    return {med <= kVolBiasMax, "median vol_rel_bias " + fmt(med) + "% (seeds: " + detail + ")"};
}

Outcome simulation_two() {
    std::vector<double> with_ni, without;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SimConfig sc;
        sc.n = 300;
        sc.zeta = 10.0;
        sc.seed = seed;
        sc.rates = TransitionRates(2, 0.1);
        const auto sim = simulate(sc, balanced_params(10.0, {0.1, 0.25}, BalanceFamily::comsgarch));
        for (double p : {0.02, 0.0}) {
            CropsConfig cfg;
            cfg.iterations = 400;
            cfg.paths = 6;
            cfg.p = p;
            cfg.seed = seed;
            const auto fit = run_crops(sim.observed, 2, cfg);
            (p > 0.0 ? with_ni : without).push_back(state_bias(sim.path, fit.state_frequency));
        }
    }
    const double a = median(with_ni), b = median(without);
    return {a <= b, "median state_bias p=0.02 " + fmt(a) + " vs p=0 " + fmt(b)};
}

Outcome forecast_check() {
    const RegimeParams p{{1.0, 2.5}, {23.0, 13.9}, {10.0, 10.0}};
    TransitionRates r(2, 0.0);
    r(1, 0) = 0.7;
    r(0, 1) = 2.0;
    const std::vector<double> dt{0.1, 0.3};
    double worst = 0.0, worst_sum = 0.0;
    for (int start = 0; start < 2; ++start) {
        const auto f = forecast(p, r, 0.4, start, dt);
        auto step = [&](double s, int k, double d) {
            return p.alpha[k] * d + (s + p.lambda[k] * s * d) * std::exp(-p.beta[k] * d);
        };
        auto xi = [&](int from, int to, double d) {
            const double stay = std::exp(-r(1 - from, from) * d);
            return from == to ? stay : 1.0 - stay;
        };
        double bar1 = 0.0, bar2 = 0.0;
        for (int a = 0; a < 2; ++a) {
            const double pa = xi(start, a, dt[0]), sa = step(0.4, a, dt[0]);
            bar1 += pa * sa;
            for (int b = 0; b < 2; ++b) bar2 += pa * xi(a, b, dt[1]) * step(sa, b, dt[1]);
        }
        worst = std::max({worst, std::abs(f.steps[0].sigma2_bar - bar1), std::abs(f.steps[1].sigma2_bar - bar2)});
        for (const auto& s : f.steps)
            worst_sum = std::max(worst_sum, std::abs(std::accumulate(s.prob.begin(), s.prob.end(), 0.0) - 1.0));
    }
    const RegimeParams one{{1.0}, {23.0}, {1.0}};
    const std::vector<double> gaps{0.1, 0.2, 0.05, 0.4};
    const auto f1 = forecast(one, TransitionRates(1), 0.3, 0, gaps);
    double s = 0.3, worst_one = 0.0;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        s = one.alpha[0] * gaps[i] + (s + one.lambda[0] * s * gaps[i]) * std::exp(-one.beta[0] * gaps[i]);
        worst_one = std::max(worst_one, std::abs(f1.steps[i].sigma2_bar - s));
    }
    return {worst <= kForecastTol && worst_sum <= kForecastTol && worst_one <= kForecastTol,
            "brute-force error " + fmt(worst) + ", probability sum error " + fmt(worst_sum) + ", scalar error " +
                fmt(worst_one)};
}

Outcome ni_conservation() {
    Rng rng(77);
    int bad = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = 3 + static_cast<std::size_t>(uniform01(rng) * 200);
        ObservedSeries obs;
        double t = 100.0 * uniform01(rng), g = standard_normal(rng);
        for (std::size_t i = 0; i <= n; ++i) {
            obs.t.push_back(t);
            obs.G.push_back(g);
            t += 1e-3 + uniform01(rng);
            g += standard_normal(rng);
        }
        const auto ni = bernoulli_ni(obs, uniform01(rng) * 0.95, rng);
        const double sy = std::accumulate(ni.diff.Y.begin(), ni.diff.Y.end(), 0.0);
        const double st = std::accumulate(ni.diff.dt.begin(), ni.diff.dt.end(), 0.0);
        double scale_y = 0.0;
        for (double y : diff_series(obs).Y) scale_y += std::abs(y);
        const double span = obs.t.back() - obs.t.front();
        bad += std::abs(sy - (obs.G.back() - obs.G.front())) > kConservationRel * scale_y ||
               std::abs(st - span) > kConservationRel * span;
    }
    const auto obs = diff_series(ObservedSeries{{0.0, 0.3, 0.7, 1.6}, {1.0, 0.4, 0.9, 2.0}});
    Rng r0(1);
    const auto id = bernoulli_ni(ObservedSeries{{0.0, 0.3, 0.7, 1.6}, {1.0, 0.4, 0.9, 2.0}}, 0.0, r0);
    const bool identity = id.diff.Y == obs.Y && id.diff.dt == obs.dt;
    return {bad == 0 && identity,
            "conservation failures " + std::to_string(bad) + "/1000, p=0 identity " + (identity ? "yes" : "no")};
}

Outcome cv_rule() {
    auto row = [](double m, double d) { return std::vector<double>{m - d, m + d}; };  // mean m, se d
    const std::vector<double> grid{0.0, 0.01, 0.02, 0.03};
    bool ok = true;
    // mean (1.0, 0.5, 0.8, 1.2), se at the minimum 0.2: first mean >= 0.7 after it is the third point
    const auto a = select_rate(grid, {row(1.0, 0.1), row(0.5, 0.2), row(0.8, 0.1), row(1.2, 0.1)});
    ok = ok && a.best_index == 1 && a.chosen_index == 2 && !a.fallback;
    const auto b = select_rate(grid, {row(0.7, 0.0), row(0.7, 0.0), row(0.7, 0.0), row(0.7, 0.0)});
    ok = ok && b.best_index == 0 && b.chosen_index == 0;
    const auto c = select_rate({0.0, 0.01, 0.02}, {row(1.0, 0.1), row(0.5, 0.2), row(0.6, 0.1)});
    ok = ok && c.best_index == 1 && c.chosen_index == 1 && c.fallback;
    const auto d = select_rate({0.05}, {row(2.0, 0.5)});
    ok = ok && d.chosen_rate == 0.05;
    const auto e = select_rate(grid, {{3.0, 1.0, 2.0}, {0.4, 0.6, 0.5}, {0.5, 0.7, 0.6}, {0.9, 0.7, 0.8}});
    // best 0.5 with se sqrt(0.02/6) = 0.0577; 0.6 >= 0.5577 at the third point
    ok = ok && e.best_index == 1 && e.chosen_index == 2;
    return {ok, "hand-computed indices " + std::string(ok ? "reproduced" : "differ")};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + COMSGARCH_CLI + "\" " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome reproducibility() {
    std::string bundle[2];
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = fs::path(COMSGARCH_TEST_DIR) / "acceptance_work" / ("run" + std::to_string(run));
        fs::remove_all(dir);
        fs::create_directories(dir);
        const std::string q = "\"";
        const auto sim = (dir / "sim.csv").string(), fit = (dir / "fit").string(), fc = (dir / "fc.csv").string();
        if (run_cli("simulate --n 200 --c 0.1,0.25 --family comsgarch --seed 11 --out " + q + sim + q) != 0 ||
            run_cli("fit --series " + q + sim + q + " --iters 40 --seed 11 --out " + q + fit + q) != 0 ||
            run_cli("forecast --fit " + q + fit + q + " --h 5 --out " + q + fc + q) != 0)
            return {false, "a command failed in run " + std::to_string(run)};
        for (const auto& name : {"sim.csv", "sim.csv.run", "fit.results.csv", "fit.run", "fit.trace.csv", "fc.csv",
                                 "fc.csv.run"}) {
            const auto body = slurp(dir / name);
            if (body.empty()) return {false, std::string("missing output ") + name};
            bundle[run] += body;
        }
    }
    return {bundle[0] == bundle[1], std::to_string(bundle[0].size()) + " bytes compared"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle equivalence", oracle_equivalence},
        {"increment variance convergence", rho_convergence},
        {"stability", stability},
        {"ensemble combinatorics", ensemble},
        {"single-regime simulation", simulation_one},
        {"two-regime simulation", simulation_two},
        {"forecast correctness", forecast_check},
        {"noise-injection conservation", ni_conservation},
        {"cross-validation rule", cv_rule},
        {"end-to-end reproducibility", reproducibility},
    };
    int failed = 0;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[c].second();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !out.pass;
        std::printf("%s %2zu %s: %s [%.1fs]\n", out.pass ? "PASS" : "FAIL", c + 1, criteria[c].first.c_str(),
                    out.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
