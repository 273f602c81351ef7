#include "comsgarch/comsgarch.h"

#include "comsgarch/analysis.hpp"
#include "comsgarch/crops.hpp"
#include "comsgarch/error.hpp"
#include "comsgarch/forecast.hpp"
#include "comsgarch/io.hpp"
#include "comsgarch/simulator.hpp"
#include "comsgarch/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <new>
#include <string>

using namespace comsgarch;

struct cg_series {
    ObservedSeries obs;
};

struct cg_simulation {
    Simulation sim;
};

struct cg_fit {
    CropsResult result;
    ResultsTable table;
    KeyValues run;  ///< full run file: configuration, hash and fitted model
    std::string hash;
    bool rho_exact = false;
};

struct cg_cv_report {
    CvReport report;
};

struct cg_forecast {
    ForecastState state;
};

namespace {

thread_local std::string g_last_error;

template <class F>
cg_status guarded(F&& f) noexcept {
    try {
        g_last_error.clear();
        f();
        return CG_OK;
    } catch (const DomainError& e) {
        g_last_error = e.what();
        if (e.index()) g_last_error += " (at increment " + std::to_string(*e.index() + 1) + ")";
        return CG_ERR_DOMAIN;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return CG_ERR_VALIDATION;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return CG_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CG_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return CG_ERR_INTERNAL;
    }
}

template <class T>
void require(const T* p, const char* what) {
    if (!p) throw ValidationError(std::string(what) + " must not be null");
}

const char* rho_name(cg_rho_mode m) {
    switch (m) {
        case CG_RHO_APPROX: return "approx";
        case CG_RHO_EXACT: return "exact";
        case CG_RHO_AUTO: return "auto";
    }
    throw ValidationError("unknown rho mode");
}

struct PreparedFit {
    CropsConfig crops;
    KeyValues config;
    bool rho_exact = false;
};

// Translates the C configuration; `config` holds only settings that affect results.
PreparedFit prepare_fit(const ObservedSeries& obs, const cg_fit_config& c) {
    if (c.states < 1) throw ValidationError("states must be >= 1");
    PreparedFit out;
    const auto diff = diff_series(obs);
    out.rho_exact = c.rho_mode == CG_RHO_EXACT || (c.rho_mode == CG_RHO_AUTO && recommend_exact_rho(diff));
    out.crops.iterations = c.iterations;
    out.crops.paths = c.paths;
    out.crops.p = c.p;
    out.crops.inference.pivotal.b = c.pivotal_b;
    out.crops.inference.rho_mode = out.rho_exact ? RhoMode::exact : RhoMode::approx;
    out.crops.seed = c.seed;
    if (c.sigma2_0 > 0.0) out.crops.sigma2_0 = c.sigma2_0;
    out.crops.threads = c.threads < 1 ? 1 : c.threads;
    out.crops.posterior_window = c.posterior_window;
    out.crops.early_stop = c.early_stop != 0;
    out.crops.validate();

    auto& kv = out.config;
    kv["states"] = std::to_string(c.states);
    kv["iterations"] = std::to_string(c.iterations);
    kv["paths"] = std::to_string(c.paths);
    kv["p"] = format_number(c.p);
    kv["b"] = std::to_string(c.pivotal_b);
    kv["rho"] = rho_name(c.rho_mode);
    kv["seed"] = std::to_string(c.seed);
    kv["sigma0"] = c.sigma2_0 > 0.0 ? format_number(c.sigma2_0) : "auto";
    kv["posterior_window"] = std::to_string(c.posterior_window);
    kv["early_stop"] = c.early_stop ? "1" : "0";
    return out;
}

template <class T>
void copy_out(const std::vector<T>& src, T* dst) {
    require(dst, "output buffer");
    std::copy(src.begin(), src.end(), dst);
}

}  // namespace

extern "C" {

const char* cg_last_error(void) { return g_last_error.c_str(); }

const char* cg_version(void) { return "1.0.0"; }

cg_status cg_run_file_write(const char* path, const char* const* keys, const char* const* values, size_t n,
                            char* hash_out) {
    return guarded([&] {
        require(path, "path");
        if (n > 0) {
            require(keys, "keys");
            require(values, "values");
        }
        KeyValues kv;
        for (std::size_t q = 0; q < n; ++q) {
            require(keys[q], "key");
            require(values[q], "value");
            kv[keys[q]] = values[q];
        }
        const std::string hash = config_hash(kv);
        kv["config_hash"] = hash;
        write_key_values(path, kv);
        if (hash_out) std::copy(hash.c_str(), hash.c_str() + hash.size() + 1, hash_out);
    });
}

cg_status cg_series_create(const double* t, const double* G, size_t n_points, cg_series** out) {
    return guarded([&] {
        require(t, "t");
        require(G, "G");
        require(out, "out");
        auto s = std::make_unique<cg_series>();
        s->obs.t.assign(t, t + n_points);
        s->obs.G.assign(G, G + n_points);
        s->obs.validate();
        *out = s.release();
    });
}

cg_status cg_series_read_csv(const char* path, cg_series** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        auto s = std::make_unique<cg_series>();
        s->obs = read_series_csv(path);
        *out = s.release();
    });
}

cg_status cg_series_write_csv(const cg_series* series, const char* path) {
    return guarded([&] {
        require(series, "series");
        require(path, "path");
        write_series_csv(path, series->obs);
    });
}

size_t cg_series_size(const cg_series* series) { return series ? series->obs.size() : 0; }

cg_status cg_series_copy(const cg_series* series, double* t, double* G) {
    return guarded([&] {
        require(series, "series");
        if (t) std::copy(series->obs.t.begin(), series->obs.t.end(), t);
        if (G) std::copy(series->obs.G.begin(), series->obs.G.end(), G);
    });
}

cg_status cg_series_gap_ratio(const cg_series* series, double* ratio) {
    return guarded([&] {
        require(series, "series");
        require(ratio, "ratio");
        *ratio = gap_ratio(diff_series(series->obs));
    });
}

void cg_series_free(cg_series* series) { delete series; }

void cg_ingest_options_default(cg_ingest_options* options) {
    if (!options) return;
    options->downsample = 1;
    options->time_in_days = 1;
    options->log_price = 1;
    options->tail = 0;
    options->price_column = 1;
}

cg_status cg_ingest_fx(const char* path, const cg_ingest_options* options, cg_series** out, size_t* rows_skipped,
                       int* recommend_exact) {
    return guarded([&] {
        require(path, "path");
        require(options, "options");
        require(out, "out");
        IngestOptions o;
        o.downsample = options->downsample;
        o.time_unit = options->time_in_days ? TimeUnit::days : TimeUnit::raw;
        o.log_price = options->log_price != 0;
        o.tail = options->tail;
        o.price_column = options->price_column;
        auto r = ingest_fx(path, o);
        auto s = std::make_unique<cg_series>();
        s->obs = std::move(r.series);
        if (rows_skipped) *rows_skipped = r.rows_skipped;
        if (recommend_exact) *recommend_exact = r.recommend_exact ? 1 : 0;
        *out = s.release();
    });
}

void cg_sim_config_default(cg_sim_config* config) {
    if (!config) return;
    static const double c_default[] = {0.1};
    config->n = 500;
    config->zeta = 10.0;
    config->exponential_gaps = 0;
    config->states = 1;
    config->c = c_default;
    config->family = 0;
    config->eta = 0.1;
    config->seed = 1;
    config->rho_exact = 0;
    config->burn_in = 100;
}

cg_status cg_simulate(const cg_sim_config* config, cg_simulation** out) {
    return guarded([&] {
        require(config, "config");
        require(config->c, "c");
        require(out, "out");
        if (config->states < 1) throw ValidationError("states must be >= 1");
        if (config->family != 0 && config->family != 1) throw ValidationError("family must be 0 or 1");
        const std::vector<double> c(config->c, config->c + config->states);
        const auto params = balanced_params(config->zeta, c,
                                            config->family == 0 ? BalanceFamily::cogarch : BalanceFamily::comsgarch);
        SimConfig sc;
        sc.n = config->n;
        sc.zeta = config->zeta;
        sc.gaps = config->exponential_gaps ? GapMode::exponential : GapMode::fixed;
        sc.rates = TransitionRates(config->states, config->states > 1 ? config->eta : 0.0);
        sc.seed = config->seed;
        sc.rho_mode = config->rho_exact ? RhoMode::exact : RhoMode::approx;
        sc.burn_in = config->burn_in;
        auto s = std::make_unique<cg_simulation>();
        s->sim = simulate(sc, params);
        *out = s.release();
    });
}

cg_status cg_simulation_series(const cg_simulation* sim, cg_series** out) {
    return guarded([&] {
        require(sim, "simulation");
        require(out, "out");
        auto s = std::make_unique<cg_series>();
        s->obs = sim->sim.observed;
        *out = s.release();
    });
}

size_t cg_simulation_length(const cg_simulation* sim) { return sim ? sim->sim.path.size() : 0; }

cg_status cg_simulation_states(const cg_simulation* sim, int* states) {
    return guarded([&] {
        require(sim, "simulation");
        require(states, "states");
        for (std::size_t i = 0; i < sim->sim.path.size(); ++i) states[i] = sim->sim.path.s[i] + 1;
    });
}

cg_status cg_simulation_sigma2(const cg_simulation* sim, double* sigma2) {
    return guarded([&] {
        require(sim, "simulation");
        copy_out(sim->sim.volatility.sigma2, sigma2);
    });
}

cg_status cg_simulation_write_truth(const cg_simulation* sim, const char* path) {
    return guarded([&] {
        require(sim, "simulation");
        require(path, "path");
        write_results_csv(path, make_results(sim->sim.observed, sim->sim.path, sim->sim.volatility.sigma2));
    });
}

void cg_simulation_free(cg_simulation* sim) { delete sim; }

void cg_fit_config_default(cg_fit_config* config) {
    if (!config) return;
    config->states = 2;
    config->iterations = 1000;
    config->paths = 6;
    config->p = 0.02;
    config->pivotal_b = 20;
    config->rho_mode = CG_RHO_AUTO;
    config->seed = 1;
    config->sigma2_0 = 0.0;
    config->threads = 1;
    config->posterior_window = 200;
    config->early_stop = 0;
}

cg_status cg_fit_run(const cg_series* series, const cg_fit_config* config, cg_fit** out) {
    return guarded([&] {
        require(series, "series");
        require(config, "config");
        require(out, "out");
        const auto prep = prepare_fit(series->obs, *config);
        auto f = std::make_unique<cg_fit>();
        f->result = run_crops(series->obs, config->states, prep.crops);
        f->table = make_results(series->obs, f->result.path, f->result.volatility.sigma2);
        f->rho_exact = prep.rho_exact;
        f->hash = config_hash(prep.config);
        f->run = prep.config;
        f->run["config_hash"] = f->hash;
        f->run["rho_used"] = prep.rho_exact ? "exact" : "approx";
        f->run["sigma2_0_used"] = format_number(f->result.sigma2_0);
        f->run["iterations_run"] = std::to_string(f->result.iterations_run);
        f->run["optimizer_warning"] = f->result.optimizer_warning ? "1" : "0";
        put_model(f->run, f->result.params, f->result.rates);
        *out = f.release();
    });
}

cg_status cg_fit_write(const cg_fit* fit, const char* prefix) {
    return guarded([&] {
        require(fit, "fit");
        require(prefix, "prefix");
        const std::string p(prefix);
        write_results_csv(p + ".results.csv", fit->table);
        write_key_values(p + ".run", fit->run);
        if (!fit->result.trace.empty())
            write_trace_csv(p + ".trace.csv", fit->result.trace, fit->result.params.states());
    });
}

cg_status cg_fit_load(const char* prefix, cg_fit** out) {
    return guarded([&] {
        require(prefix, "prefix");
        require(out, "out");
        const std::string p(prefix);
        auto f = std::make_unique<cg_fit>();
        f->run = read_key_values(p + ".run");
        get_model(f->run, f->result.params, f->result.rates);
        f->table = read_results_csv(p + ".results.csv");
        f->result.path = f->table.path;
        f->result.path.validate(f->result.params.states());
        f->result.sigma2_0 = parse_number(require_key(f->run, "sigma2_0_used"), "sigma2_0_used");
        f->rho_exact = require_key(f->run, "rho_used") == "exact";
        f->hash = require_key(f->run, "config_hash");
        f->result.volatility.sigma2 = f->table.sigma2;
        f->result.volatility.sigma2_0 = f->result.sigma2_0;
        *out = f.release();
    });
}

size_t cg_fit_states(const cg_fit* fit) { return fit ? fit->result.params.states() : 0; }

size_t cg_fit_length(const cg_fit* fit) { return fit ? fit->result.path.size() : 0; }

cg_status cg_fit_params(const cg_fit* fit, double* alpha, double* beta, double* lambda) {
    return guarded([&] {
        require(fit, "fit");
        copy_out(fit->result.params.alpha, alpha);
        copy_out(fit->result.params.beta, beta);
        copy_out(fit->result.params.lambda, lambda);
    });
}

cg_status cg_fit_rate(const cg_fit* fit, size_t to, size_t from, double* rate) {
    return guarded([&] {
        require(fit, "fit");
        require(rate, "rate");
        const std::size_t nu = fit->result.rates.states();
        if (to < 1 || from < 1 || to > nu || from > nu || to == from)
            throw ValidationError("rate labels must be distinct states in 1..nu");
        *rate = fit->result.rates(to - 1, from - 1);
    });
}

cg_status cg_fit_path(const cg_fit* fit, int* states) {
    return guarded([&] {
        require(fit, "fit");
        require(states, "states");
        for (std::size_t i = 0; i < fit->result.path.size(); ++i) states[i] = fit->result.path.s[i] + 1;
    });
}

cg_status cg_fit_sigma2(const cg_fit* fit, double* sigma2) {
    return guarded([&] {
        require(fit, "fit");
        copy_out(fit->result.volatility.sigma2, sigma2);
    });
}

int cg_fit_rho_exact(const cg_fit* fit) { return fit && fit->rho_exact ? 1 : 0; }

const char* cg_fit_config_hash(const cg_fit* fit) { return fit ? fit->hash.c_str() : ""; }

void cg_fit_free(cg_fit* fit) { delete fit; }

cg_status cg_cross_validate(const cg_series* series, const cg_cv_config* config, cg_cv_report** out) {
    return guarded([&] {
        require(series, "series");
        require(config, "config");
        require(config->grid, "grid");
        require(out, "out");
        CvConfig cv;
        cv.folds = config->folds;
        cv.grid.assign(config->grid, config->grid + config->grid_size);
        cv.crops = prepare_fit(series->obs, config->fit).crops;
        cv.seed = config->seed;
        auto r = std::make_unique<cg_cv_report>();
        r->report = cross_validate(series->obs, config->fit.states, cv);
        *out = r.release();
    });
}

cg_status cg_cv_result(const cg_cv_report* report, size_t* best_index, size_t* chosen_index, double* chosen_rate,
                       int* fallback) {
    return guarded([&] {
        require(report, "report");
        if (best_index) *best_index = report->report.best_index;
        if (chosen_index) *chosen_index = report->report.chosen_index;
        if (chosen_rate) *chosen_rate = report->report.chosen_rate;
        if (fallback) *fallback = report->report.fallback ? 1 : 0;
    });
}

cg_status cg_cv_write_csv(const cg_cv_report* report, const char* path) {
    return guarded([&] {
        require(report, "report");
        require(path, "path");
        write_cv_csv(path, report->report);
    });
}

void cg_cv_report_free(cg_cv_report* report) { delete report; }

cg_status cg_select_rate(const double* grid, size_t grid_size, const double* fold_mse, size_t folds,
                         size_t* best_index, size_t* chosen_index, int* fallback) {
    return guarded([&] {
        require(grid, "grid");
        require(fold_mse, "fold_mse");
        std::vector<std::vector<double>> mse(grid_size);
        for (std::size_t j = 0; j < grid_size; ++j) mse[j].assign(fold_mse + j * folds, fold_mse + (j + 1) * folds);
        const auto r = select_rate(std::vector<double>(grid, grid + grid_size), mse);
        if (best_index) *best_index = r.best_index;
        if (chosen_index) *chosen_index = r.chosen_index;
        if (fallback) *fallback = r.fallback ? 1 : 0;
    });
}

cg_status cg_forecast_create(const cg_fit* fit, size_t h, const double* gaps, cg_forecast** out) {
    return guarded([&] {
        require(fit, "fit");
        require(out, "out");
        if (h < 1) throw ValidationError("forecast horizon must be >= 1");
        const std::vector<double> future = gaps ? std::vector<double>(gaps, gaps + h)
                                                : default_future_gaps(fit->table.diff(), h);
        auto f = std::make_unique<cg_forecast>();
        f->state = forecast(fit->result, future);
        *out = f.release();
    });
}

size_t cg_forecast_horizon(const cg_forecast* forecast) { return forecast ? forecast->state.steps.size() : 0; }

cg_status cg_forecast_sigma2_bar(const cg_forecast* forecast, double* sigma2_bar) {
    return guarded([&] {
        require(forecast, "forecast");
        copy_out(forecast->state.sigma2_bar(), sigma2_bar);
    });
}

cg_status cg_forecast_write_csv(const cg_forecast* forecast, const char* path) {
    return guarded([&] {
        require(forecast, "forecast");
        require(path, "path");
        write_forecast_csv(path, forecast->state);
    });
}

void cg_forecast_free(cg_forecast* forecast) { delete forecast; }

cg_status cg_ensemble_weight(int k, int b, double p, double* count, double* weight) {
    return guarded([&] {
        const auto w = ensemble_weight(k, b, p);
        if (count) *count = w.count;
        if (weight) *weight = w.weight;
    });
}

cg_status cg_ensemble_table_write(const int* b_values, size_t nb, const double* p_values, size_t np, int k_max,
                                  const char* path) {
    return guarded([&] {
        require(b_values, "b_values");
        require(p_values, "p_values");
        require(path, "path");
        const auto rows = ensemble_table(std::vector<int>(b_values, b_values + nb),
                                         std::vector<double>(p_values, p_values + np), k_max);
        CsvTable table;
        table.header = {"b", "p", "k", "count", "weight", "nb_mass"};
        for (const auto& r : rows)
            table.rows.push_back({static_cast<double>(r.b), r.p, static_cast<double>(r.k), r.count, r.weight,
                                  negative_binomial_mass(r.k, r.b, r.p)});
        write_csv(path, table);
    });
}

cg_status cg_stability_ratio(const double* rho2, size_t m, double* ratio, double* cross_product) {
    return guarded([&] {
        require(rho2, "rho2");
        const auto s = stability_ratio(std::vector<double>(rho2, rho2 + m));
        if (ratio) *ratio = s.ratio;
        if (cross_product) *cross_product = s.cross_product;
    });
}

cg_status cg_stability_experiment(const cg_fit* fit, double p, double eps, int reps, uint64_t seed,
                                  cg_stability_result* out) {
    return guarded([&] {
        require(fit, "fit");
        require(out, "out");
        const auto r = stability_experiment(fit->table.diff(), fit->result.path, fit->result.params,
                                            fit->result.sigma2_0, fit->rho_exact ? RhoMode::exact : RhoMode::approx,
                                            p, eps, reps, seed);
        *out = {r.mean_ni, r.mean_no_ni, r.se_ni, r.se_no_ni, r.mean_gap, r.se_gap, r.expected_ni, r.expected_no_ni};
    });
}

cg_status cg_bias_from_files(const char* truth_results, const char* fit_results, double* state_bias_out,
                             double* vol_rel_bias_out) {
    return guarded([&] {
        require(truth_results, "truth_results");
        require(fit_results, "fit_results");
        const auto truth = read_results_csv(truth_results);
        const auto fit = read_results_csv(fit_results);
        if (truth.path.size() != fit.path.size())
            throw ValidationError("truth and fit files cover different numbers of increments");
        if (state_bias_out) *state_bias_out = state_bias(truth.path, fit.path);
        if (vol_rel_bias_out) *vol_rel_bias_out = vol_rel_bias(truth.sigma2, fit.sigma2);
    });
}

}  // extern "C"
