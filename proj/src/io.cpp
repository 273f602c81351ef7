#include "comsgarch/io.hpp"

#include "comsgarch/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace comsgarch {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) out.push_back(trim(field));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string at_line(const std::string& path, std::size_t line) {
    return path + ":" + std::to_string(line) + ": ";
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path + " for reading");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw ValidationError("failed writing " + path);
}

std::string join_row(const std::vector<double>& row) {
    std::string s;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) s += ',';
        s += format_number(row[j]);
    }
    return s;
}

// days since 1970-01-01 of a proleptic Gregorian date
long long days_from_civil(long long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long long>(doe) - 719468;
}

bool all_digits(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int to_int(const std::string& s) { return std::stoi(s); }

double calendar_seconds(int y, int mo, int d, int h, int mi, double sec, const std::string& text) {
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0.0 || sec >= 61.0)
        throw ValidationError("timestamp out of range: '" + text + "'");
    const auto days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
    return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
}

}  // namespace

std::string format_number(double x) {
    if (!std::isfinite(x)) throw DomainError("cannot serialize a non-finite value");
    char buf[40];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf, static_cast<std::size_t>(len));
}

double parse_number(const std::string& text, const std::string& what) {
    const std::string s = trim(text);
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (s.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v))
        throw ValidationError("invalid number '" + s + "' for " + what);
    return v;
}

std::vector<double> CsvTable::column(std::size_t j) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.at(j));
    return out;
}

CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected_header) {
    auto in = open_in(path);
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (!have_header) {
            if (fields != expected_header) {
                std::string want;
                for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
                throw ValidationError(at_line(path, lineno) + "expected header '" + want + "'");
            }
            table.header = fields;
            have_header = true;
            continue;
        }
        if (fields.size() != expected_header.size())
            throw ValidationError(at_line(path, lineno) + "expected " + std::to_string(expected_header.size()) +
                                  " fields, found " + std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) {
            try {
                row.push_back(parse_number(fields[j], "column '" + expected_header[j] + "'"));
            } catch (const ValidationError& e) {
                throw ValidationError(at_line(path, lineno) + e.what());
            }
        }
        table.rows.push_back(std::move(row));
    }
    if (!have_header) throw ValidationError(path + ": empty file");
    return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
    auto out = open_out(path);
    for (std::size_t j = 0; j < table.header.size(); ++j) out << (j ? "," : "") << table.header[j];
    out << '\n';
    for (const auto& r : table.rows) out << join_row(r) << '\n';
    finish(out, path);
}

KeyValues read_key_values(const std::string& path) {
    auto in = open_in(path);
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ValidationError(at_line(path, lineno) + "expected key=value");
        kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
    }
    return kv;
}

void write_key_values(const std::string& path, const KeyValues& kv) {
    auto out = open_out(path);
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
    finish(out, path);
}

std::string config_hash(const KeyValues& config) {
    std::uint64_t h = 14695981039346656037ull;
    auto feed = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
    };
    for (const auto& [k, v] : config) feed(k + "=" + v + "\n");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ObservedSeries read_series_csv(const std::string& path) {
    const auto table = read_csv(path, {"t", "G"});
    ObservedSeries obs{table.column(0), table.column(1)};
    try {
        obs.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return obs;
}

void write_series_csv(const std::string& path, const ObservedSeries& obs) {
    CsvTable table;
    table.header = {"t", "G"};
    for (std::size_t i = 0; i < obs.size(); ++i) table.rows.push_back({obs.t[i], obs.G[i]});
    write_csv(path, table);
}

ResultsTable make_results(const ObservedSeries& obs, const StatePath& path, const std::vector<double>& sigma2) {
    const auto diff = diff_series(obs);
    if (path.size() != diff.size() || sigma2.size() != diff.size())
        throw ValidationError("results need one state and variance per increment");
    ResultsTable r;
    r.t.assign(obs.t.begin() + 1, obs.t.end());
    r.Y = diff.Y;
    r.dt = diff.dt;
    r.path = path;
    r.sigma2 = sigma2;
    return r;
}

ResultsTable read_results_csv(const std::string& path) {
    const auto table = read_csv(path, {"t", "Y", "dt", "state", "sigma2"});
    if (table.rows.empty()) throw ValidationError(path + ": no result rows");
    ResultsTable r;
    for (std::size_t q = 0; q < table.rows.size(); ++q) {
        const auto& row = table.rows[q];
        const double st = row[3];
        if (st < 1.0 || st != std::floor(st))
            throw ValidationError(at_line(path, q + 2) + "state must be a positive integer label");
        if (!(row[2] > 0.0)) throw ValidationError(at_line(path, q + 2) + "dt must be positive");
        if (!(row[4] > 0.0)) throw ValidationError(at_line(path, q + 2) + "sigma2 must be positive");
        r.t.push_back(row[0]);
        r.Y.push_back(row[1]);
        r.dt.push_back(row[2]);
        r.path.s.push_back(static_cast<int>(st) - 1);
        r.sigma2.push_back(row[4]);
    }
    return r;
}

void write_results_csv(const std::string& path, const ResultsTable& r) {
    CsvTable table;
    table.header = {"t", "Y", "dt", "state", "sigma2"};
    for (std::size_t i = 0; i < r.Y.size(); ++i)
        table.rows.push_back({r.t[i], r.Y[i], r.dt[i], static_cast<double>(r.path.s[i] + 1), r.sigma2[i]});
    write_csv(path, table);
}

void write_trace_csv(const std::string& path, const std::vector<IterationRecord>& trace, std::size_t nu) {
    CsvTable table;
    table.header = {"iteration", "objective", "theta_objective", "kept"};
    for (std::size_t k = 1; k <= nu; ++k)
        for (const char* name : {"alpha", "beta", "lambda"}) table.header.push_back(name + std::string(".") + std::to_string(k));
    for (std::size_t k = 1; k <= nu; ++k)
        for (std::size_t j = 1; j <= nu; ++j)
            if (j != k) table.header.push_back("eta." + std::to_string(j) + "." + std::to_string(k));
    for (const auto& rec : trace) {
        std::vector<double> row{static_cast<double>(rec.iteration), rec.objective, rec.theta_objective,
                                static_cast<double>(rec.kept)};
        for (std::size_t k = 0; k < nu; ++k) {
            row.push_back(rec.params.alpha[k]);
            row.push_back(rec.params.beta[k]);
            row.push_back(rec.params.lambda[k]);
        }
        for (std::size_t k = 0; k < nu; ++k)
            for (std::size_t j = 0; j < nu; ++j)
                if (j != k) row.push_back(rec.rates(j, k));
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

void write_cv_csv(const std::string& path, const CvReport& report) {
    CsvTable table;
    table.header = {"p", "mean_mse", "se"};
    for (std::size_t j = 0; j < report.grid.size(); ++j)
        table.rows.push_back({report.grid[j], report.mean_mse[j], report.se[j]});
    write_csv(path, table);
}

void write_forecast_csv(const std::string& path, const ForecastState& forecast) {
    CsvTable table;
    table.header = {"step", "sigma2_bar"};
    for (std::size_t q = 0; q < forecast.steps.size(); ++q)
        table.rows.push_back({static_cast<double>(q + 1), forecast.steps[q].sigma2_bar});
    write_csv(path, table);
}

void put_model(KeyValues& kv, const RegimeParams& params, const TransitionRates& rates) {
    const std::size_t nu = params.states();
    kv["states"] = std::to_string(nu);
    for (std::size_t k = 0; k < nu; ++k) {
        const std::string lab = std::to_string(k + 1);
        kv["alpha." + lab] = format_number(params.alpha[k]);
        kv["beta." + lab] = format_number(params.beta[k]);
        kv["lambda." + lab] = format_number(params.lambda[k]);
        for (std::size_t j = 0; j < nu; ++j)
            if (j != k) kv["eta." + std::to_string(j + 1) + "." + lab] = format_number(rates(j, k));
    }
}

const std::string& require_key(const KeyValues& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError("missing key '" + key + "'");
    return it->second;
}

void get_model(const KeyValues& kv, RegimeParams& params, TransitionRates& rates) {
    const double states = parse_number(require_key(kv, "states"), "states");
    if (states < 1.0 || states != std::floor(states) || states > 64.0)
        throw ValidationError("states must be a positive integer");
    const auto nu = static_cast<std::size_t>(states);
    params = RegimeParams{};
    rates = TransitionRates(nu);
    for (std::size_t k = 0; k < nu; ++k) {
        const std::string lab = std::to_string(k + 1);
        params.alpha.push_back(parse_number(require_key(kv, "alpha." + lab), "alpha." + lab));
        params.beta.push_back(parse_number(require_key(kv, "beta." + lab), "beta." + lab));
        params.lambda.push_back(parse_number(require_key(kv, "lambda." + lab), "lambda." + lab));
        for (std::size_t j = 0; j < nu; ++j) {
            if (j == k) continue;
            const std::string key = "eta." + std::to_string(j + 1) + "." + lab;
            rates(j, k) = parse_number(require_key(kv, key), key);
        }
    }
    params.validate();
    rates.validate();
}

double gap_ratio(const DiffSeries& diff) {
    if (diff.size() == 0) throw ValidationError("empty series");
    std::vector<double> d = diff.dt;
    std::sort(d.begin(), d.end());
    const std::size_t m = d.size() / 2;
    const double median = d.size() % 2 ? d[m] : 0.5 * (d[m - 1] + d[m]);
    return d.back() / median;
}

double parse_timestamp(const std::string& text) {
    const std::string s = trim(text);
    // "YYYYMMDD HHMMSS[mmm]"
    if (s.size() >= 15 && s[8] == ' ' && all_digits(s.substr(0, 8)) && all_digits(s.substr(9, 6))) {
        double sec = to_int(s.substr(13, 2));
        if (s.size() > 15) {
            if (!all_digits(s.substr(15))) throw ValidationError("unrecognized timestamp '" + s + "'");
            sec += std::stod("0." + s.substr(15));
        }
        return calendar_seconds(to_int(s.substr(0, 4)), to_int(s.substr(4, 2)), to_int(s.substr(6, 2)),
                                to_int(s.substr(9, 2)), to_int(s.substr(11, 2)), sec, s);
    }
    // "YYYY-MM-DD[ T]HH:MM[:SS[.fff]]"
    if (s.size() >= 16 && s[4] == '-' && s[7] == '-' && (s[10] == ' ' || s[10] == 'T') && s[13] == ':') {
        if (!all_digits(s.substr(0, 4)) || !all_digits(s.substr(5, 2)) || !all_digits(s.substr(8, 2)) ||
            !all_digits(s.substr(11, 2)) || !all_digits(s.substr(14, 2)))
            throw ValidationError("unrecognized timestamp '" + s + "'");
        double sec = 0.0;
        if (s.size() > 16) {
            if (s[16] != ':') throw ValidationError("unrecognized timestamp '" + s + "'");
            sec = parse_number(s.substr(17), "seconds");
        }
        return calendar_seconds(to_int(s.substr(0, 4)), to_int(s.substr(5, 2)), to_int(s.substr(8, 2)),
                                to_int(s.substr(11, 2)), to_int(s.substr(14, 2)), sec, s);
    }
    return parse_number(s, "timestamp");
}

IngestResult ingest_fx(const std::string& path, const IngestOptions& options) {
    if (options.downsample < 1) throw ValidationError("downsample factor must be >= 1");
    if (options.price_column < 1) throw ValidationError("price column must follow the timestamp column");
    auto in = open_in(path);
    IngestResult out;
    std::vector<double> ts, price;
    std::string line;
    std::size_t lineno = 0, prev_line = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        ++out.rows_read;
        const char sep = line.find(';') != std::string::npos ? ';' : ',';
        const auto fields = split(line, sep);
        double t = 0.0, g = 0.0;
        try {
            if (fields.size() <= options.price_column) throw ValidationError("too few columns");
            t = parse_timestamp(fields[0]);
            g = parse_number(fields[options.price_column], "price");
            if (options.log_price && !(g > 0.0)) throw ValidationError("non-positive price");
        } catch (const ValidationError&) {
            ++out.rows_skipped;
            continue;
        }
        if (!ts.empty() && !(t > ts.back()))
            throw ValidationError(at_line(path, lineno) + "timestamp does not increase (previous row at line " +
                                  std::to_string(prev_line) + ")");
        prev_line = lineno;
        ts.push_back(t);
        price.push_back(g);
    }

    std::vector<double> kt, kg;
    for (std::size_t q = 0; q < ts.size(); q += options.downsample) {
        kt.push_back(ts[q]);
        kg.push_back(options.log_price ? std::log(price[q]) : price[q]);
    }
    if (options.tail > 0 && kt.size() > options.tail) {
        const auto drop = static_cast<long>(kt.size() - options.tail);
        kt.erase(kt.begin(), kt.begin() + drop);
        kg.erase(kg.begin(), kg.begin() + drop);
    }
    if (kt.size() < 2)
        throw ValidationError(path + ": fewer than 2 usable rows after down-sampling (" +
                              std::to_string(out.rows_skipped) + " rows skipped)");
    if (options.time_unit == TimeUnit::days) {
        const double t0 = kt.front();
        for (double& t : kt) t = (t - t0) / 86400.0;
    }
    out.series = ObservedSeries{std::move(kt), std::move(kg)};
    out.series.validate();
    out.gap_ratio = gap_ratio(diff_series(out.series));
    out.recommend_exact = out.gap_ratio > kExactRhoGapRatio;
    return out;
}

}  // namespace comsgarch
