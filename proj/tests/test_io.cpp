#include "comsgarch/error.hpp"
#include "comsgarch/io.hpp"

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace comsgarch;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() / ("comsgarch_io_" + std::to_string(std::random_device{}()));
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
    [[nodiscard]] std::string file(const std::string& name) const { return (dir / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

/// Minute bars on weekdays only, "YYYYMMDD HHMMSS;open;high;low;close;volume".
std::size_t write_minute_bars(const std::string& path, std::size_t rows) {
    using namespace std::chrono;
    std::ofstream out(path);
    sys_days day = 2024y / January / 1;  // a Monday
    std::size_t written = 0;
    double price = 1.10;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0.0, 1e-4);
    while (written < rows) {
        const weekday wd{day};
        if (wd != Saturday && wd != Sunday) {
            const year_month_day ymd{day};
            for (int minute = 0; minute < 1440 && written < rows; ++minute, ++written) {
                price *= std::exp(z(rng));
                char buf[96];
                std::snprintf(buf, sizeof buf, "%04d%02u%02u %02d%02d00;%.5f;%.5f;%.5f;%.5f;0\n", int(ymd.year()),
                              unsigned(ymd.month()), unsigned(ymd.day()), minute / 60, minute % 60, price, price, price,
                              price);
                out << buf;
            }
        }
        day += days{1};
    }
    return written;
}

}  // namespace

TEST_CASE("numbers round-trip") {
    for (double x : {0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 123456789.123456789}) CHECK(parse_number(format_number(x), "x") == x);
    CHECK_THROWS_AS((void)format_number(std::nan("")), DomainError);
    CHECK_THROWS_AS((void)parse_number("1.5x", "x"), ValidationError);
    CHECK_THROWS_AS((void)parse_number("", "x"), ValidationError);
}

TEST_CASE("series and results files round-trip") {
    TempDir tmp;
    ObservedSeries obs{{0.0, 0.1, 0.25, 0.4}, {1.0, 1.0 + 1.0 / 3.0, 0.9, 2.0 / 7.0}};
    write_series_csv(tmp.file("s.csv"), obs);
    const auto back = read_series_csv(tmp.file("s.csv"));
    CHECK(back.t == obs.t);
    CHECK(back.G == obs.G);

    const auto res = make_results(obs, StatePath{{0, 1, 1}}, {0.3, 0.5, 1.0 / 7.0});
    write_results_csv(tmp.file("r.csv"), res);
    const auto rb = read_results_csv(tmp.file("r.csv"));
    CHECK(rb.path.s == std::vector<int>{0, 1, 1});
    CHECK(rb.sigma2 == res.sigma2);
    CHECK(rb.Y == res.Y);
    CHECK(rb.dt == res.dt);
    std::ifstream raw(tmp.file("r.csv"));
    std::string header, first;
    std::getline(raw, header);
    std::getline(raw, first);
    CHECK(header == "t,Y,dt,state,sigma2");
    CHECK(first.find(",1,") != std::string::npos);  // states are written 1-based
}

TEST_CASE("malformed files report the line") {
    TempDir tmp;
    write_text(tmp.file("bad.csv"), "t,G\n0,1\n0.5,abc\n");
    try {
        (void)read_series_csv(tmp.file("bad.csv"));
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
    write_text(tmp.file("hdr.csv"), "time,G\n0,1\n");
    CHECK_THROWS_AS((void)read_series_csv(tmp.file("hdr.csv")), ValidationError);
    write_text(tmp.file("mono.csv"), "t,G\n0,1\n0,2\n");
    CHECK_THROWS_AS((void)read_series_csv(tmp.file("mono.csv")), ValidationError);
    CHECK_THROWS_AS((void)read_series_csv(tmp.file("missing.csv")), ValidationError);
}

TEST_CASE("key-value files and config hash") {
    TempDir tmp;
    KeyValues kv{{"seed", "7"}, {"states", "2"}, {"p", "0.02"}};
    write_key_values(tmp.file("a.run"), kv);
    CHECK(read_key_values(tmp.file("a.run")) == kv);
    const auto h = config_hash(kv);
    CHECK(h.size() == 16);
    CHECK(config_hash(kv) == h);
    kv["seed"] = "8";
    CHECK(config_hash(kv) != h);
    // FNV-1a 64 of the empty input is the offset basis
    CHECK(config_hash(KeyValues{}) == "cbf29ce484222325");

    write_text(tmp.file("c.run"), "# comment\nstates = 3\n\nbroken line\n");
    CHECK_THROWS_AS((void)read_key_values(tmp.file("c.run")), ValidationError);

    RegimeParams p{{1.0, 2.5}, {23.0, 13.8}, {10.0, 10.0}};
    TransitionRates r(2, 0.0);
    r(1, 0) = 0.1;
    r(0, 1) = 0.3;
    KeyValues model;
    put_model(model, p, r);
    RegimeParams p2;
    TransitionRates r2;
    get_model(model, p2, r2);
    CHECK(p2 == p);
    CHECK(r2 == r);
    CHECK(require_key(model, "states") == "2");
    CHECK_THROWS_AS((void)require_key(model, "nope"), ValidationError);
}

TEST_CASE("timestamps") {
    CHECK(parse_timestamp("19700102 000000") == 86400.0);
    CHECK(parse_timestamp("1970-01-01 00:01") == 60.0);
    CHECK(parse_timestamp("1970-01-01T00:00:30") == 30.0);
    CHECK(parse_timestamp("20000301 000000") - parse_timestamp("20000228 000000") == 2.0 * 86400.0);  // leap year
    CHECK(parse_timestamp("42.5") == 42.5);
    CHECK_THROWS_AS((void)parse_timestamp("2024-13-01 00:00"), ValidationError);
    CHECK_THROWS_AS((void)parse_timestamp("yesterday"), ValidationError);
}

TEST_CASE("ingestion") {
    TempDir tmp;
    write_text(tmp.file("id.csv"), "1,10\n2,11\n4,9\n");
    IngestOptions raw;
    raw.time_unit = TimeUnit::raw;
    raw.log_price = false;
    const auto id = ingest_fx(tmp.file("id.csv"), raw);
    CHECK(id.series.t == std::vector<double>{1, 2, 4});
    CHECK(id.series.G == std::vector<double>{10, 11, 9});
    CHECK(id.rows_skipped == 0);

    write_text(tmp.file("skip.csv"), "time,price\n1,10\n2,oops\n3,12\n");
    const auto sk = ingest_fx(tmp.file("skip.csv"), raw);
    CHECK(sk.rows_skipped == 2);
    CHECK(sk.series.size() == 2);

    write_text(tmp.file("back.csv"), "1,10\n3,11\n2,12\n");
    try {
        (void)ingest_fx(tmp.file("back.csv"), raw);
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }

    // weekday minute bars: 94 days of 1440 rows = 135360; take 135090
    const auto rows = write_minute_bars(tmp.file("fx.csv"), 135090);
    REQUIRE(rows == 135090);
    IngestOptions fx;
    fx.downsample = 90;
    fx.tail = 1501;
    const auto res = ingest_fx(tmp.file("fx.csv"), fx);
    CHECK(res.rows_read == 135090);
    CHECK(res.series.size() == 1501);
    CHECK(res.series.t.front() == 0.0);
    CHECK(res.series.G.front() < 0.2);  // log of a price near 1.1
    const auto d = diff_series(res.series);
    CHECK(*std::max_element(d.dt.begin(), d.dt.end()) >= 2.0);
    CHECK(res.recommend_exact);
    CHECK(res.gap_ratio > kExactRhoGapRatio);

    IngestOptions bad;
    bad.downsample = 0;
    CHECK_THROWS_AS((void)ingest_fx(tmp.file("fx.csv"), bad), ValidationError);
}
