// Command-line front end. Talks to the library only through the C interface.

#include "comsgarch/comsgarch.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace {

enum Exit { kOk = 0, kValidation = 2, kDomain = 3 };

/// Carries a library status out of a command handler.
struct Failure {
    int code;
    std::string message;
};

void check(cg_status st) {
    if (st == CG_OK) return;
    const int code = st == CG_ERR_DOMAIN ? kDomain : st == CG_ERR_VALIDATION ? kValidation : 1;
    throw Failure{code, cg_last_error()};
}

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(p); }
    T** out() { return &p; }
    T* get() const { return p; }
};

using Series = Handle<cg_series, cg_series_free>;
using Sim = Handle<cg_simulation, cg_simulation_free>;
using Fit = Handle<cg_fit, cg_fit_free>;
using Cv = Handle<cg_cv_report, cg_cv_report_free>;
using Forecast = Handle<cg_forecast, cg_forecast_free>;

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (const auto& x : v) {
        if (!s.empty()) s += ',';
        if constexpr (std::is_floating_point_v<T>)
            s += num(x);
        else
            s += std::to_string(x);
    }
    return s;
}

/// Writes path with the given settings plus a config hash, and reports both on stderr.
void stamp(const std::string& path, const std::map<std::string, std::string>& kv) {
    std::vector<const char*> keys, values;
    for (const auto& [k, v] : kv) {
        keys.push_back(k.c_str());
        values.push_back(v.c_str());
    }
    char hash[17] = {};
    check(cg_run_file_write(path.c_str(), keys.data(), values.data(), kv.size(), hash));
    std::cerr << "run: seed=" << kv.at("seed") << " config_hash=" << hash << " -> " << path << '\n';
}

/// COMSGARCH_THREADS caps the worker count; unset means the hardware concurrency.
int thread_cap() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("COMSGARCH_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1)
            throw Failure{kValidation, "COMSGARCH_THREADS must be a positive integer"};
        return static_cast<int>(std::min<long>(v, hw));
    }
    return hw;
}

cg_rho_mode parse_rho(const std::string& s) {
    if (s == "exact") return CG_RHO_EXACT;
    if (s == "approx") return CG_RHO_APPROX;
    return CG_RHO_AUTO;
}

struct FitFlags {
    std::size_t states = 2;
    double p = 0.02;
    int m = 6;
    int iters = 1000;
    int b = 20;
    std::string rho = "auto";
    std::uint64_t seed = 1;
    double sigma0 = 0.0;
    int window = 200;
    bool early_stop = false;

    void add(CLI::App* app) {
        app->add_option("--states", states, "Number of regimes")->check(CLI::Range(1, 16));
        app->add_option("--p", p, "Noise-injection rate in [0,1)")->check(CLI::Range(0.0, 0.999999));
        app->add_option("--m", m, "Candidate paths per iteration")->check(CLI::PositiveNumber);
        app->add_option("--iters", iters, "CROPS iterations")->check(CLI::PositiveNumber);
        app->add_option("--b", b, "Pivotal window length")->check(CLI::PositiveNumber);
        app->add_option("--rho", rho, "Increment variance: exact, approx or auto")
            ->check(CLI::IsMember({"exact", "approx", "auto"}));
        app->add_option("--seed", seed, "Random seed");
        app->add_option("--sigma0", sigma0, "Initial variance (default var(Y)/mean(dt))")
            ->check(CLI::NonNegativeNumber);
        app->add_option("--window", window, "Iterations averaged for state frequencies")->check(CLI::PositiveNumber);
        app->add_flag("--early-stop", early_stop, "Stop once the objective plateaus");
    }

    [[nodiscard]] cg_fit_config config() const {
        cg_fit_config c;
        cg_fit_config_default(&c);
        c.states = states;
        c.iterations = iters;
        c.paths = m;
        c.p = p;
        c.pivotal_b = b;
        c.rho_mode = parse_rho(rho);
        c.seed = seed;
        c.sigma2_0 = sigma0;
        c.threads = thread_cap();
        c.posterior_window = window;
        c.early_stop = early_stop ? 1 : 0;
        return c;
    }
};

void note_rho(const std::string& requested, int exact_used) {
    if (requested == "auto" && exact_used)
        std::cerr << "note: max/median gap ratio exceeds 10; using the exact increment variance\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"COMS-GARCH simulation, CROPS estimation and volatility forecasting"};
    app.set_config("--config", "", "Read options from a key=value file");
    app.require_subcommand(1);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate a COMS-GARCH series");
    std::size_t sim_n = 500;
    double sim_zeta = 10.0;
    std::vector<double> sim_c{0.1};
    double sim_eta = 0.1;
    std::string sim_gaps = "fixed", sim_family = "cogarch", sim_rho = "approx", sim_out, sim_truth;
    std::uint64_t sim_seed = 1;
    std::size_t sim_burn = 100;
    sim_cmd->add_option("--n", sim_n, "Number of increments")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--zeta", sim_zeta, "Observation intensity")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--c", sim_c, "Balance constant per state, in (0,1)")->delimiter(',');
    sim_cmd->add_option("--eta", sim_eta, "Transition rate between every pair of states")
        ->check(CLI::NonNegativeNumber);
    sim_cmd->add_option("--gaps", sim_gaps, "fixed or exponential")->check(CLI::IsMember({"fixed", "exponential"}));
    sim_cmd->add_option("--family", sim_family, "cogarch (lambda = c zeta) or comsgarch (lambda = zeta)")
        ->check(CLI::IsMember({"cogarch", "comsgarch"}));
    sim_cmd->add_option("--rho", sim_rho, "Increment variance used to draw Y")
        ->check(CLI::IsMember({"exact", "approx"}));
    sim_cmd->add_option("--seed", sim_seed, "Random seed");
    sim_cmd->add_option("--burn-in", sim_burn, "Discarded warm-up steps");
    sim_cmd->add_option("--out", sim_out, "Series CSV (t,G)")->required();
    sim_cmd->add_option("--truth", sim_truth, "Results CSV with the true states and volatility");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Estimate states and parameters with CROPS");
    FitFlags fit_flags;
    std::string fit_series, fit_out;
    fit_flags.add(fit_cmd);
    fit_cmd->add_option("--series", fit_series, "Series CSV (t,G)")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--out", fit_out, "Output prefix")->required();

    // cv
    auto* cv_cmd = app.add_subcommand("cv", "Choose the noise-injection rate by cross-validation");
    FitFlags cv_flags;
    std::string cv_series, cv_out;
    int cv_folds = 5;
    std::vector<double> cv_grid{0.0, 0.01, 0.02, 0.03, 0.04};
    cv_flags.add(cv_cmd);
    cv_cmd->add_option("--series", cv_series, "Series CSV (t,G)")->required()->check(CLI::ExistingFile);
    cv_cmd->add_option("--folds", cv_folds, "Number of folds")->check(CLI::Range(2, 1000));
    cv_cmd->add_option("--grid", cv_grid, "Ascending NI rates")->delimiter(',');
    cv_cmd->add_option("--out", cv_out, "CV report CSV (p,mean_mse,se)")->required();

    // forecast
    auto* fc_cmd = app.add_subcommand("forecast", "h-step volatility forecast from a fit");
    fc_cmd->set_help_flag("--help", "Print this help message and exit");
    std::string fc_fit, fc_out;
    std::size_t fc_h = 1;
    std::vector<double> fc_gaps;
    fc_cmd->add_option("--fit", fc_fit, "Prefix given to fit --out")->required();
    fc_cmd->add_option("--h", fc_h, "Horizon")->check(CLI::PositiveNumber);
    fc_cmd->add_option("--gaps", fc_gaps, "Future gaps (default: median historical gap)")->delimiter(',');
    fc_cmd->add_option("--out", fc_out, "Forecast CSV (step,sigma2_bar)")->required();

    // analyze
    auto* an_cmd = app.add_subcommand("analyze", "Theory and evaluation harnesses");
    an_cmd->require_subcommand(1);
    auto* ens_cmd = an_cmd->add_subcommand("ensemble", "Ensemble sizes and weights of noise injection");
    std::vector<int> ens_b{1, 2, 5};
    std::vector<double> ens_p{0.1, 0.3};
    int ens_kmax = 12;
    std::string ens_out;
    ens_cmd->add_option("--b", ens_b, "Pivotal window lengths")->delimiter(',');
    ens_cmd->add_option("--p", ens_p, "NI rates")->delimiter(',');
    ens_cmd->add_option("--kmax", ens_kmax, "Largest k")->check(CLI::PositiveNumber);
    ens_cmd->add_option("--out", ens_out, "Table CSV (b,p,k,count,weight,nb_mass)")->required();

    auto* stab_cmd = an_cmd->add_subcommand("stability", "Perturbation stability with and without NI");
    std::string stab_fit, stab_out;
    double stab_p = 0.02, stab_eps = 0.1;
    int stab_reps = 10000;
    std::uint64_t stab_seed = 1;
    stab_cmd->add_option("--fit", stab_fit, "Prefix given to fit --out")->required();
    stab_cmd->add_option("--p", stab_p, "NI rate")->check(CLI::Range(0.0, 0.999999));
    stab_cmd->add_option("--eps", stab_eps, "Perturbation standard deviation")->check(CLI::PositiveNumber);
    stab_cmd->add_option("--reps", stab_reps, "Replications")->check(CLI::Range(2, 100000000));
    stab_cmd->add_option("--seed", stab_seed, "Random seed");
    stab_cmd->add_option("--out", stab_out, "Key=value summary file");

    auto* bias_cmd = an_cmd->add_subcommand("bias", "State and volatility bias against a known truth");
    std::string bias_truth, bias_fit;
    bias_cmd->add_option("--truth", bias_truth, "Truth results CSV from simulate --truth")
        ->required()->check(CLI::ExistingFile);
    bias_cmd->add_option("--fit", bias_fit, "Fitted results CSV")->required()->check(CLI::ExistingFile);

    // ingest
    auto* ing_cmd = app.add_subcommand("ingest", "Convert raw minute prices into a series file");
    std::string ing_in, ing_out, ing_unit = "days";
    std::size_t ing_factor = 1, ing_tail = 0, ing_col = 1;
    bool ing_no_log = false;
    ing_cmd->add_option("--input", ing_in, "Raw file: timestamp then price columns")->required()
        ->check(CLI::ExistingFile);
    ing_cmd->add_option("--downsample", ing_factor, "Keep every k-th row")->check(CLI::PositiveNumber);
    ing_cmd->add_option("--time-unit", ing_unit, "days or raw")->check(CLI::IsMember({"days", "raw"}));
    ing_cmd->add_option("--tail", ing_tail, "Keep the last n points (0 keeps all)");
    ing_cmd->add_option("--price-column", ing_col, "Zero-based price column")->check(CLI::PositiveNumber);
    ing_cmd->add_flag("--no-log", ing_no_log, "Keep prices untransformed");
    ing_cmd->add_option("--out", ing_out, "Series CSV (t,G)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kValidation;
    }

    try {
        if (*sim_cmd) {
            cg_sim_config c;
            cg_sim_config_default(&c);
            c.n = sim_n;
            c.zeta = sim_zeta;
            c.exponential_gaps = sim_gaps == "exponential";
            c.states = sim_c.size();
            c.c = sim_c.data();
            c.family = sim_family == "comsgarch";
            c.eta = sim_eta;
            c.seed = sim_seed;
            c.rho_exact = sim_rho == "exact";
            c.burn_in = sim_burn;
            Sim sim;
            check(cg_simulate(&c, sim.out()));
            Series series;
            check(cg_simulation_series(sim.get(), series.out()));
            check(cg_series_write_csv(series.get(), sim_out.c_str()));
            if (!sim_truth.empty()) check(cg_simulation_write_truth(sim.get(), sim_truth.c_str()));
            stamp(sim_out + ".run", {{"command", "simulate"},
                                     {"n", std::to_string(sim_n)},
                                     {"zeta", num(sim_zeta)},
                                     {"c", join(sim_c)},
                                     {"eta", num(sim_eta)},
                                     {"gaps", sim_gaps},
                                     {"family", sim_family},
                                     {"rho", sim_rho},
                                     {"burn_in", std::to_string(sim_burn)},
                                     {"seed", std::to_string(sim_seed)}});
        } else if (*fit_cmd) {
            Series series;
            check(cg_series_read_csv(fit_series.c_str(), series.out()));
            const auto c = fit_flags.config();
            Fit fit;
            check(cg_fit_run(series.get(), &c, fit.out()));
            note_rho(fit_flags.rho, cg_fit_rho_exact(fit.get()));
            check(cg_fit_write(fit.get(), fit_out.c_str()));
            std::cerr << "run: seed=" << fit_flags.seed << " config_hash=" << cg_fit_config_hash(fit.get())
                      << " -> " << fit_out << ".run\n";
        } else if (*cv_cmd) {
            Series series;
            check(cg_series_read_csv(cv_series.c_str(), series.out()));
            cg_cv_config c;
            c.folds = cv_folds;
            c.grid = cv_grid.data();
            c.grid_size = cv_grid.size();
            c.fit = cv_flags.config();
            c.seed = cv_flags.seed;
            Cv report;
            check(cg_cross_validate(series.get(), &c, report.out()));
            check(cg_cv_write_csv(report.get(), cv_out.c_str()));
            std::size_t best = 0, chosen = 0;
            double rate = 0.0;
            int fallback = 0;
            check(cg_cv_result(report.get(), &best, &chosen, &rate, &fallback));
            std::cout << "best_p=" << num(cv_grid[best]) << " chosen_p=" << num(rate)
                      << (fallback ? " (no grid point passed the one-SE threshold)" : "") << '\n';
            stamp(cv_out + ".run", {{"command", "cv"},
                                    {"folds", std::to_string(cv_folds)},
                                    {"grid", join(cv_grid)},
                                    {"states", std::to_string(cv_flags.states)},
                                    {"m", std::to_string(cv_flags.m)},
                                    {"iters", std::to_string(cv_flags.iters)},
                                    {"b", std::to_string(cv_flags.b)},
                                    {"rho", cv_flags.rho},
                                    {"sigma0", num(cv_flags.sigma0)},
                                    {"seed", std::to_string(cv_flags.seed)},
                                    {"chosen_p", num(rate)}});
        } else if (*fc_cmd) {
            if (!fc_gaps.empty() && fc_gaps.size() != fc_h)
                throw Failure{kValidation, "--gaps must list exactly --h values"};
            Fit fit;
            check(cg_fit_load(fc_fit.c_str(), fit.out()));
            Forecast fc;
            check(cg_forecast_create(fit.get(), fc_h, fc_gaps.empty() ? nullptr : fc_gaps.data(), fc.out()));
            check(cg_forecast_write_csv(fc.get(), fc_out.c_str()));
            stamp(fc_out + ".run", {{"command", "forecast"},
                                    {"fit_config_hash", cg_fit_config_hash(fit.get())},
                                    {"h", std::to_string(fc_h)},
                                    {"gaps", fc_gaps.empty() ? "median" : join(fc_gaps)},
                                    {"seed", "none"}});
        } else if (*ens_cmd) {
            check(cg_ensemble_table_write(ens_b.data(), ens_b.size(), ens_p.data(), ens_p.size(), ens_kmax,
                                          ens_out.c_str()));
        } else if (*stab_cmd) {
            Fit fit;
            check(cg_fit_load(stab_fit.c_str(), fit.out()));
            cg_stability_result r;
            check(cg_stability_experiment(fit.get(), stab_p, stab_eps, stab_reps, stab_seed, &r));
            const std::map<std::string, std::string> kv{
                {"command", "analyze-stability"}, {"p", num(stab_p)}, {"eps", num(stab_eps)},
                {"reps", std::to_string(stab_reps)}, {"seed", std::to_string(stab_seed)},
                {"mean_ni", num(r.mean_ni)}, {"mean_no_ni", num(r.mean_no_ni)}, {"se_ni", num(r.se_ni)},
                {"se_no_ni", num(r.se_no_ni)}, {"mean_gap", num(r.mean_gap)}, {"se_gap", num(r.se_gap)},
                {"expected_ni", num(r.expected_ni)}, {"expected_no_ni", num(r.expected_no_ni)}};
            for (const auto& [k, v] : kv) std::cout << k << '=' << v << '\n';
            if (!stab_out.empty()) stamp(stab_out, kv);
        } else if (*bias_cmd) {
            double sb = 0.0, vb = 0.0;
            check(cg_bias_from_files(bias_truth.c_str(), bias_fit.c_str(), &sb, &vb));
            std::cout << "state_bias=" << num(sb) << "\nvol_rel_bias_percent=" << num(vb) << '\n';
        } else if (*ing_cmd) {
            cg_ingest_options o;
            cg_ingest_options_default(&o);
            o.downsample = ing_factor;
            o.time_in_days = ing_unit == "days";
            o.log_price = ing_no_log ? 0 : 1;
            o.tail = ing_tail;
            o.price_column = ing_col;
            Series series;
            std::size_t skipped = 0;
            int exact = 0;
            check(cg_ingest_fx(ing_in.c_str(), &o, series.out(), &skipped, &exact));
            check(cg_series_write_csv(series.get(), ing_out.c_str()));
            std::cerr << "ingest: " << cg_series_size(series.get()) << " points, " << skipped
                      << " unparseable rows skipped\n";
            if (exact)
                std::cerr << "note: max/median gap ratio exceeds 10; fit with --rho exact (auto selects it)\n";
        }
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << '\n';
        return f.code;
    }
    return kOk;
}
