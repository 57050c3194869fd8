#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "unicast/data.hpp"
#include "unicast/errors.hpp"
#include "unicast/synth.hpp"

using namespace unicast;

namespace {

struct TempPath {
    std::string path;
    explicit TempPath(const std::string& name) : path("tmp_" + name) {}
    ~TempPath() { std::remove(path.c_str()); }
};

bool periodic_with(const std::vector<double>& xs, int period) {
    for (size_t i = 0; i + period < xs.size(); ++i) {
        if (xs[i] != xs[i + period]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("synth: deterministic per seed, shaped per spec") {
    SynthSpec s;
    s.kind = SynthKind::SineMix;
    s.num_series = 5;
    s.length = 64;
    s.seed = 42;
    SeriesCollection a = make_synthetic(s);
    SeriesCollection b = make_synthetic(s);
    REQUIRE(a.series.size() == 5);
    CHECK(a.series == b.series);
    CHECK(a.name == "sine_mix");
    for (const auto& row : a.series) {
        CHECK(row.size() == 64);
        for (double v : row) CHECK(std::isfinite(v));
    }
    s.seed = 43;
    CHECK(make_synthetic(s).series != a.series);
}

TEST_CASE("synth: series are independent of the collection size") {
    SynthSpec s;
    s.num_series = 3;
    s.length = 32;
    s.seed = 7;
    SeriesCollection small = make_synthetic(s);
    s.num_series = 6;
    SeriesCollection large = make_synthetic(s);
    for (int i = 0; i < 3; ++i) CHECK(small.series[i] == large.series[i]);
}

TEST_CASE("synth: noise-free sine repeats exactly") {
    SynthSpec s;
    s.kind = SynthKind::SineMix;
    s.num_series = 8;
    s.length = 128;
    s.noise_sigma = 0.0;
    s.seed = 3;
    SeriesCollection c = make_synthetic(s);
    for (const auto& row : c.series) {
        bool found = false;
        for (int p : {8, 12, 16, 24, 32}) {
            if (periodic_with(row, p)) {
                found = true;
                break;
            }
        }
        CHECK(found);
    }

    s.noise_sigma = 0.1;
    SeriesCollection noisy = make_synthetic(s);
    bool any_periodic = false;
    for (const auto& row : noisy.series) {
        for (int p : {8, 12, 16, 24, 32}) any_periodic = any_periodic || periodic_with(row, p);
    }
    CHECK_FALSE(any_periodic);
}

TEST_CASE("synth: random walk increments have zero sample mean") {
    SynthSpec s;
    s.kind = SynthKind::RandomWalk;
    s.num_series = 1;
    s.length = 10000;
    s.noise_sigma = 1.0;
    s.seed = 11;
    SeriesCollection c = make_synthetic(s);
    const std::vector<double>& xs = c.series[0];
    double acc = xs[0];
    for (size_t i = 1; i < xs.size(); ++i) acc += xs[i] - xs[i - 1];
    double mean = acc / double(xs.size());
    CHECK(std::abs(mean) < 4.0 / std::sqrt(10000.0));
}

TEST_CASE("synth: trend_season is finite and deterministic") {
    SynthSpec s;
    s.kind = SynthKind::TrendSeason;
    s.num_series = 4;
    s.length = 100;
    s.seed = 9;
    SeriesCollection a = make_synthetic(s);
    CHECK(a.series == make_synthetic(s).series);
    CHECK(a.name == "trend_season");
    for (const auto& row : a.series) {
        for (double v : row) CHECK(std::isfinite(v));
    }
}

TEST_CASE("synth: validation and kind names") {
    SynthSpec s;
    s.num_series = 0;
    CHECK_THROWS_AS(make_synthetic(s), config_error);
    s.num_series = 1;
    s.length = 1;
    CHECK_THROWS_AS(make_synthetic(s), config_error);
    s.length = 10;
    s.noise_sigma = -1;
    CHECK_THROWS_AS(make_synthetic(s), config_error);

    for (SynthKind k : {SynthKind::SineMix, SynthKind::TrendSeason, SynthKind::RandomWalk}) {
        CHECK(synth_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(synth_kind_from_string("brownian"), config_error);
}

TEST_CASE("synth: csv writer round-trips through the loader") {
    SynthSpec s;
    s.kind = SynthKind::SineMix;
    s.num_series = 3;
    s.length = 40;
    s.noise_sigma = 0.2;
    s.seed = 21;
    SeriesCollection c = make_synthetic(s);
    TempPath f("synth_roundtrip.csv");
    write_collection_csv(c, f.path);
    SeriesCollection back = load_collection(f.path, InputSchema::CsvWide);
    CHECK(back.series == c.series);
}
