#ifndef COMSGARCH_H
#define COMSGARCH_H

/* C interface to the COMS-GARCH library. Every function returns a cg_status;
 * on failure cg_last_error() describes the problem for the calling thread.
 * Objects are opaque and released with their *_free function. State labels
 * are one-based at this boundary. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(COMSGARCH_BUILDING)
#    define CG_API __declspec(dllexport)
#  else
#    define CG_API __declspec(dllimport)
#  endif
#else
#  define CG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cg_status {
    CG_OK = 0,
    CG_ERR_INTERNAL = 1,
    CG_ERR_VALIDATION = 2, /* bad arguments, malformed or unreadable files */
    CG_ERR_DOMAIN = 3      /* numerical failure or parameters outside their domain */
} cg_status;

typedef struct cg_series cg_series;
typedef struct cg_simulation cg_simulation;
typedef struct cg_fit cg_fit;
typedef struct cg_cv_report cg_cv_report;
typedef struct cg_forecast cg_forecast;

typedef enum cg_rho_mode { CG_RHO_APPROX = 0, CG_RHO_EXACT = 1, CG_RHO_AUTO = 2 } cg_rho_mode;

CG_API const char* cg_last_error(void);
CG_API const char* cg_version(void);

/* Writes a key=value run file with the pairs plus a config_hash entry computed
 * over them; the hash (16 hex digits and a terminator) is copied to hash_out if non-NULL. */
CG_API cg_status cg_run_file_write(const char* path, const char* const* keys, const char* const* values, size_t n,
                                   char* hash_out);

/* ---- observed series ---- */
CG_API cg_status cg_series_create(const double* t, const double* G, size_t n_points, cg_series** out);
CG_API cg_status cg_series_read_csv(const char* path, cg_series** out);
CG_API cg_status cg_series_write_csv(const cg_series* series, const char* path);
CG_API size_t cg_series_size(const cg_series* series);
/* Copies the points into caller buffers of cg_series_size() entries (either may be NULL). */
CG_API cg_status cg_series_copy(const cg_series* series, double* t, double* G);
/* max(dt) / median(dt); values above 10 call for the exact increment variance. */
CG_API cg_status cg_series_gap_ratio(const cg_series* series, double* ratio);
CG_API void cg_series_free(cg_series* series);

typedef struct cg_ingest_options {
    size_t downsample;   /* keep every factor-th row, >= 1 */
    int time_in_days;    /* nonzero: fractional days from the first point; zero: raw timestamps */
    int log_price;       /* nonzero: natural log of the price */
    size_t tail;         /* keep the last `tail` points, 0 keeps all */
    size_t price_column; /* zero-based column of the price, >= 1 */
} cg_ingest_options;

CG_API void cg_ingest_options_default(cg_ingest_options* options);
CG_API cg_status cg_ingest_fx(const char* path, const cg_ingest_options* options, cg_series** out,
                              size_t* rows_skipped, int* recommend_exact);

/* ---- simulation ---- */
typedef struct cg_sim_config {
    size_t n;             /* increments */
    double zeta;          /* observation intensity */
    int exponential_gaps; /* nonzero: gaps ~ Exp(zeta); zero: fixed 1/zeta */
    size_t states;
    const double* c;      /* per-state balance constant in (0,1), `states` entries */
    int family;           /* 0: lambda = c zeta, 1: lambda = zeta */
    double eta;           /* every off-diagonal transition rate */
    uint64_t seed;
    int rho_exact;
    size_t burn_in;
} cg_sim_config;

CG_API void cg_sim_config_default(cg_sim_config* config);
CG_API cg_status cg_simulate(const cg_sim_config* config, cg_simulation** out);
CG_API cg_status cg_simulation_series(const cg_simulation* sim, cg_series** out);
CG_API size_t cg_simulation_length(const cg_simulation* sim);
CG_API cg_status cg_simulation_states(const cg_simulation* sim, int* states);
CG_API cg_status cg_simulation_sigma2(const cg_simulation* sim, double* sigma2);
/* Results-format file (t, Y, dt, state, sigma2) with the true path and volatility. */
CG_API cg_status cg_simulation_write_truth(const cg_simulation* sim, const char* path);
CG_API void cg_simulation_free(cg_simulation* sim);

/* ---- CROPS fit ---- */
typedef struct cg_fit_config {
    size_t states;
    int iterations;
    int paths;              /* candidate paths per iteration */
    double p;               /* noise-injection rate */
    int pivotal_b;
    cg_rho_mode rho_mode;
    uint64_t seed;
    double sigma2_0;        /* <= 0 selects var(Y)/mean(dt) */
    int threads;
    int posterior_window;
    int early_stop;
} cg_fit_config;

CG_API void cg_fit_config_default(cg_fit_config* config);
CG_API cg_status cg_fit_run(const cg_series* series, const cg_fit_config* config, cg_fit** out);
/* Writes <prefix>.results.csv, <prefix>.run and <prefix>.trace.csv. */
CG_API cg_status cg_fit_write(const cg_fit* fit, const char* prefix);
/* Rebuilds a fit from <prefix>.results.csv and <prefix>.run. */
CG_API cg_status cg_fit_load(const char* prefix, cg_fit** out);
CG_API size_t cg_fit_states(const cg_fit* fit);
CG_API size_t cg_fit_length(const cg_fit* fit);
CG_API cg_status cg_fit_params(const cg_fit* fit, double* alpha, double* beta, double* lambda);
CG_API cg_status cg_fit_rate(const cg_fit* fit, size_t to, size_t from, double* rate);
CG_API cg_status cg_fit_path(const cg_fit* fit, int* states);
CG_API cg_status cg_fit_sigma2(const cg_fit* fit, double* sigma2);
CG_API int cg_fit_rho_exact(const cg_fit* fit);
CG_API const char* cg_fit_config_hash(const cg_fit* fit);
CG_API void cg_fit_free(cg_fit* fit);

/* ---- NI-rate cross-validation ---- */
typedef struct cg_cv_config {
    int folds;
    const double* grid;  /* ascending NI rates */
    size_t grid_size;
    cg_fit_config fit;
    uint64_t seed;
} cg_cv_config;

CG_API cg_status cg_cross_validate(const cg_series* series, const cg_cv_config* config, cg_cv_report** out);
CG_API cg_status cg_cv_result(const cg_cv_report* report, size_t* best_index, size_t* chosen_index,
                              double* chosen_rate, int* fallback);
CG_API cg_status cg_cv_write_csv(const cg_cv_report* report, const char* path);
CG_API void cg_cv_report_free(cg_cv_report* report);
/* One-standard-error rule on a grid_size x folds row-major MSE matrix. Indices are zero-based. */
CG_API cg_status cg_select_rate(const double* grid, size_t grid_size, const double* fold_mse, size_t folds,
                                size_t* best_index, size_t* chosen_index, int* fallback);

/* ---- forecasting ---- */
/* gaps may be NULL, in which case the median historical gap is used for every step. */
CG_API cg_status cg_forecast_create(const cg_fit* fit, size_t h, const double* gaps, cg_forecast** out);
CG_API size_t cg_forecast_horizon(const cg_forecast* forecast);
CG_API cg_status cg_forecast_sigma2_bar(const cg_forecast* forecast, double* sigma2_bar);
CG_API cg_status cg_forecast_write_csv(const cg_forecast* forecast, const char* path);
CG_API void cg_forecast_free(cg_forecast* forecast);

/* ---- analysis ---- */
CG_API cg_status cg_ensemble_weight(int k, int b, double p, double* count, double* weight);
/* CSV with columns b, p, k, count, weight, nb_mass. */
CG_API cg_status cg_ensemble_table_write(const int* b_values, size_t nb, const double* p_values, size_t np,
                                         int k_max, const char* path);
CG_API cg_status cg_stability_ratio(const double* rho2, size_t m, double* ratio, double* cross_product);

typedef struct cg_stability_result {
    double mean_ni, mean_no_ni, se_ni, se_no_ni, mean_gap, se_gap, expected_ni, expected_no_ni;
} cg_stability_result;

/* Perturbation experiment around a fitted path with an NI mask drawn at rate p. */
CG_API cg_status cg_stability_experiment(const cg_fit* fit, double p, double eps, int reps, uint64_t seed,
                                         cg_stability_result* out);
/* Mean misclassification and mean relative volatility error (percent) of `fit` against truth. */
CG_API cg_status cg_bias_from_files(const char* truth_results, const char* fit_results, double* state_bias,
                                    double* vol_rel_bias);

#ifdef __cplusplus
}
#endif

#endif
