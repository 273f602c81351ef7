#pragma once

// File formats: CSV tables with a one-line header, flat key=value run files,
// and ingestion of raw minute-level price data.

#include "comsgarch/crops.hpp"
#include "comsgarch/forecast.hpp"
#include "comsgarch/model.hpp"
#include "comsgarch/tuning.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace comsgarch {

/// 17 significant digits, locale independent.
[[nodiscard]] std::string format_number(double x);

/// Strict parse of a whole field; throws ValidationError naming `what`.
[[nodiscard]] double parse_number(const std::string& text, const std::string& what);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    [[nodiscard]] std::vector<double> column(std::size_t j) const;
};

/// Reads a numeric CSV and checks the header; errors carry "path:line:".
[[nodiscard]] CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected_header);
void write_csv(const std::string& path, const CsvTable& table);

using KeyValues = std::map<std::string, std::string>;

[[nodiscard]] KeyValues read_key_values(const std::string& path);
/// Keys are written in sorted order so equal maps give identical files.
void write_key_values(const std::string& path, const KeyValues& kv);

/// FNV-1a 64 over the sorted key=value lines, as 16 hex digits.
[[nodiscard]] std::string config_hash(const KeyValues& config);

[[nodiscard]] ObservedSeries read_series_csv(const std::string& path);
void write_series_csv(const std::string& path, const ObservedSeries& obs);

/// One row per increment: t_i, Y_i, dt_i, one-based state, sigma_i^2.
struct ResultsTable {
    std::vector<double> t;
    std::vector<double> Y;
    std::vector<double> dt;
    StatePath path;  ///< zero-based in memory
    std::vector<double> sigma2;

    [[nodiscard]] DiffSeries diff() const { return {Y, dt}; }
};

[[nodiscard]] ResultsTable make_results(const ObservedSeries& obs, const StatePath& path,
                                        const std::vector<double>& sigma2);
[[nodiscard]] ResultsTable read_results_csv(const std::string& path);
void write_results_csv(const std::string& path, const ResultsTable& results);

/// Per-iteration objective and parameter values.
void write_trace_csv(const std::string& path, const std::vector<IterationRecord>& trace, std::size_t nu);
void write_cv_csv(const std::string& path, const CvReport& report);
void write_forecast_csv(const std::string& path, const ForecastState& forecast);

/// alpha.k, beta.k, lambda.k and eta.j.k with one-based labels.
void put_model(KeyValues& kv, const RegimeParams& params, const TransitionRates& rates);
void get_model(const KeyValues& kv, RegimeParams& params, TransitionRates& rates);
[[nodiscard]] const std::string& require_key(const KeyValues& kv, const std::string& key);

/// max(dt) / median(dt).
[[nodiscard]] double gap_ratio(const DiffSeries& diff);
inline constexpr double kExactRhoGapRatio = 10.0;
[[nodiscard]] inline bool recommend_exact_rho(const DiffSeries& diff) {
    return gap_ratio(diff) > kExactRhoGapRatio;
}

enum class TimeUnit { days, raw };

struct IngestOptions {
    std::size_t downsample = 1;  ///< keep every factor-th parsed row
    TimeUnit time_unit = TimeUnit::days;
    bool log_price = true;
    std::size_t tail = 0;        ///< keep the last `tail` points; 0 keeps all
    std::size_t price_column = 1;  ///< zero-based column holding the price
};

struct IngestResult {
    ObservedSeries series;
    std::size_t rows_read = 0;
    std::size_t rows_skipped = 0;  ///< unparseable rows, including a header line
    double gap_ratio = 0.0;
    bool recommend_exact = false;
};

/// Raw rows "timestamp<sep>price..." with ',' or ';' separators. Timestamps may be
/// plain seconds, "YYYYMMDD HHMMSS" or "YYYY-MM-DD[ T]HH:MM[:SS]". In days mode
/// times are fractional days from the first retained point; raw mode keeps the
/// timestamp value (seconds for calendar formats).
[[nodiscard]] IngestResult ingest_fx(const std::string& path, const IngestOptions& options);

/// Seconds since 1970-01-01 for a timestamp string; throws ValidationError.
[[nodiscard]] double parse_timestamp(const std::string& text);

}  // namespace comsgarch
