#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "unicast/data.hpp"
#include "unicast/errors.hpp"
#include "unicast/rng.hpp"

using namespace unicast;

namespace {

struct TempFile {
    std::string path;
    TempFile(const std::string& name, const std::string& content) : path("tmp_" + name) {
        std::ofstream out(path, std::ios::binary);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load: wide csv") {
    TempFile f("wide.csv", "1,2,3\n4,5,6\n");
    SeriesCollection c = load_collection(f.path, InputSchema::CsvWide);
    REQUIRE(c.series.size() == 2);
    CHECK(c.series[0] == std::vector<double>{1, 2, 3});
    CHECK(c.series[1] == std::vector<double>{4, 5, 6});
    CHECK(c.source_ids == std::vector<int>{0, 1});
    CHECK(c.name == "tmp_wide");
}

TEST_CASE("load: the same data in every schema") {
    TempFile wide("eq_wide.csv", "1,2.5,3\n4,5,6\n");
    TempFile lng("eq_long.csv", "a,1\na,2.5\nb,4\na,3\nb,5\nb,6\n");
    TempFile jl("eq.jsonl",
                "{\"id\":\"a\",\"values\":[1,2.5,3]}\n{\"id\":\"b\",\"values\":[4,5,6]}\n");
    SeriesCollection cw = load_collection(wide.path, InputSchema::CsvWide);
    SeriesCollection cl = load_collection(lng.path, InputSchema::CsvLong);
    SeriesCollection cj = load_collection(jl.path, InputSchema::Jsonl);
    CHECK(cw.series == cl.series);
    CHECK(cw.series == cj.series);
}

TEST_CASE("load: error reporting") {
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_collection("no_such_file.csv", InputSchema::CsvWide), input_error);
    }
    SUBCASE("empty file") {
        TempFile f("empty.csv", "\n  \n");
        CHECK_THROWS_WITH_AS(load_collection(f.path, InputSchema::CsvWide),
                             doctest::Contains("no series"), input_error);
    }
    SUBCASE("nan names the line") {
        TempFile f("nan.csv", "1,2,3\n4,nan,6\n");
        CHECK_THROWS_WITH_AS(load_collection(f.path, InputSchema::CsvWide),
                             doctest::Contains("line 2"), input_error);
    }
    SUBCASE("inf rejected") {
        TempFile f("inf.csv", "1,inf,3\n");
        CHECK_THROWS_AS(load_collection(f.path, InputSchema::CsvWide), input_error);
    }
    SUBCASE("garbage names the line") {
        TempFile f("junk.csv", "1,2\n3,zap\n");
        CHECK_THROWS_WITH_AS(load_collection(f.path, InputSchema::CsvWide),
                             doctest::Contains("line 2"), input_error);
    }
    SUBCASE("trailing junk after a number") {
        TempFile f("trail.csv", "1,2 x\n");
        CHECK_THROWS_AS(load_collection(f.path, InputSchema::CsvWide), input_error);
    }
    SUBCASE("long row needs two fields") {
        TempFile f("short.csv", "a,1,9\n");
        CHECK_THROWS_WITH_AS(load_collection(f.path, InputSchema::CsvLong),
                             doctest::Contains("line 1"), input_error);
    }
    SUBCASE("jsonl without values") {
        TempFile f("noval.jsonl", "{\"id\":\"a\"}\n");
        CHECK_THROWS_AS(load_collection(f.path, InputSchema::Jsonl), input_error);
    }
    SUBCASE("jsonl non-numeric entry") {
        TempFile f("strval.jsonl", "{\"id\":\"a\",\"values\":[1,\"two\"]}\n");
        CHECK_THROWS_AS(load_collection(f.path, InputSchema::Jsonl), input_error);
    }
    SUBCASE("single-point series rejected") {
        TempFile f("one.csv", "1,2,3\n7\n");
        CHECK_THROWS_WITH_AS(load_collection(f.path, InputSchema::CsvWide),
                             doctest::Contains("series 1"), input_error);
    }
}

TEST_CASE("presets cover the benchmark table") {
    struct Row {
        const char* name;
        int context;
        StandardizationMode mode;
        SplitAxis axis;
        SubsampleRule rule;
    };
    const Row rows[] = {
        {"covid", 30, StandardizationMode::WholeSeries, SplitAxis::SeriesAxis,
         SubsampleRule::None},
        {"nn5", 56, StandardizationMode::PerWindow, SplitAxis::TimeAxis, SubsampleRule::None},
        {"car_parts", 12, StandardizationMode::WholeSeries, SplitAxis::SeriesAxis,
         SubsampleRule::None},
        {"au_elec", 48, StandardizationMode::PerWindow, SplitAxis::TimeAxis,
         SubsampleRule::TruncateLong},
        {"cif2016", 12, StandardizationMode::WholeSeries, SplitAxis::SeriesAxis,
         SubsampleRule::None},
        {"dominick", 8, StandardizationMode::PerWindow, SplitAxis::TimeAxis,
         SubsampleRule::SampleSeries},
        {"hospital", 12, StandardizationMode::WholeSeries, SplitAxis::SeriesAxis,
         SubsampleRule::None},
        {"tourism", 24, StandardizationMode::WholeSeries, SplitAxis::SeriesAxis,
         SubsampleRule::None},
    };
    for (const Row& r : rows) {
        CAPTURE(r.name);
        auto p = dataset_preset(r.name);
        REQUIRE(p.has_value());
        CHECK(p->context_len == r.context);
        CHECK(p->mode == r.mode);
        CHECK(p->axis == r.axis);
        CHECK(p->subsample == r.rule);
    }
    CHECK_FALSE(dataset_preset("weather").has_value());

    SeriesCollection c;
    c.name = "tourism";
    apply_preset(c);
    CHECK(c.context_len == 24);
    CHECK(c.horizon == 24);
    c.name = "weather";
    CHECK_THROWS_AS(apply_preset(c), config_error);
}

TEST_CASE("subsample: truncation caps long series only") {
    SeriesCollection c;
    c.name = "au_elec";
    c.series = {std::vector<double>(20000, 1.0), std::vector<double>(10, 2.0)};
    c.source_ids = {0, 1};
    c.subsample = SubsampleRule::TruncateLong;
    Rng rng(7);
    SeriesCollection out = apply_subsample(c, rng);
    CHECK(out.series[0].size() == 15000);
    CHECK(out.series[1].size() == 10);
    CHECK(out.source_ids == c.source_ids);
}

TEST_CASE("subsample: series sampling keeps 100 and is seeded") {
    SeriesCollection c;
    c.name = "dominick";
    c.subsample = SubsampleRule::SampleSeries;
    for (int i = 0; i < 120; ++i) c.series.push_back({double(i), double(i + 1)});
    c.source_ids.resize(120);
    for (int i = 0; i < 120; ++i) c.source_ids[i] = i;

    Rng rng(3);
    SeriesCollection a = apply_subsample(c, rng);
    SeriesCollection b = apply_subsample(c, Rng(3));
    REQUIRE(a.series.size() == 100);
    CHECK(a.source_ids == b.source_ids);
    CHECK(std::is_sorted(a.source_ids.begin(), a.source_ids.end()));
    std::set<int> seen(a.source_ids.begin(), a.source_ids.end());
    CHECK(seen.size() == 100);
    for (size_t i = 0; i < a.series.size(); ++i) {
        CHECK(a.series[i][0] == double(a.source_ids[i]));
    }
    SeriesCollection d = apply_subsample(c, Rng(4));
    CHECK(a.source_ids != d.source_ids);

    c.series.resize(99);
    c.source_ids.resize(99);
    CHECK_THROWS_AS(apply_subsample(c, rng), config_error);
}

TEST_CASE("split: time axis cuts at 60 and 80 percent") {
    SeriesCollection c;
    c.name = "t";
    c.axis = SplitAxis::TimeAxis;
    std::vector<double> ten;
    for (int i = 0; i < 10; ++i) ten.push_back(i);
    std::vector<double> long_one;
    for (int i = 0; i < 212; ++i) long_one.push_back(i * 0.5);
    c.series = {ten, long_one};
    c.source_ids = {0, 1};

    Rng rng(1);
    SplitResult r = split(c, rng);
    CHECK(r.train.series[0].size() == 6);
    CHECK(r.val.series[0].size() == 2);
    CHECK(r.test.series[0].size() == 2);
    CHECK(r.train.series[1].size() == 127);
    CHECK(r.val.series[1].size() == 42);
    CHECK(r.test.series[1].size() == 43);

    // Segments concatenate back to the original series.
    for (size_t i = 0; i < c.series.size(); ++i) {
        std::vector<double> cat = r.train.series[i];
        cat.insert(cat.end(), r.val.series[i].begin(), r.val.series[i].end());
        cat.insert(cat.end(), r.test.series[i].begin(), r.test.series[i].end());
        CHECK(cat == c.series[i]);
    }
    CHECK(r.val.source_ids == c.source_ids);

    c.series = {std::vector<double>{1, 2, 3, 4}};
    c.source_ids = {0};
    CHECK_THROWS_WITH_AS(split(c, rng), doctest::Contains("at least 5"), input_error);
}

TEST_CASE("split: series axis deals whole series 60:20:20") {
    SeriesCollection c;
    c.name = "s";
    c.axis = SplitAxis::SeriesAxis;
    for (int i = 0; i < 10; ++i) c.series.push_back({double(i), double(i), double(i)});
    c.source_ids.resize(10);
    for (int i = 0; i < 10; ++i) c.source_ids[i] = i;

    SplitResult r = split(c, Rng(11));
    CHECK(r.train.series.size() == 6);
    CHECK(r.val.series.size() == 2);
    CHECK(r.test.series.size() == 2);

    std::set<int> all;
    for (int id : r.train.source_ids) all.insert(id);
    for (int id : r.val.source_ids) all.insert(id);
    for (int id : r.test.source_ids) all.insert(id);
    CHECK(all.size() == 10);

    // Same seed, same deal; different seed, different deal.
    SplitResult r2 = split(c, Rng(11));
    CHECK(r.train.source_ids == r2.train.source_ids);
    SplitResult r3 = split(c, Rng(12));
    CHECK(r.train.source_ids != r3.train.source_ids);

    c.series.resize(4);
    c.source_ids.resize(4);
    CHECK_THROWS_AS(split(c, Rng(1)), input_error);
}

TEST_CASE("windows: count matches the closed form and brute force") {
    std::vector<double> seg(37);
    for (size_t i = 0; i < seg.size(); ++i) seg[i] = double(i);

    for (int C : {1, 3, 8}) {
        for (int H : {1, 2, 5}) {
            for (int stride : {1, 2, 3, 7}) {
                CAPTURE(C);
                CAPTURE(H);
                CAPTURE(stride);
                auto ws = make_windows(seg, C, H, stride);
                int n = static_cast<int>(seg.size());
                int expected = n < C + H ? 0 : (n - C - H) / stride + 1;
                CHECK(static_cast<int>(ws.size()) == expected);
                // Brute force: every offset that fits, nothing else.
                size_t k = 0;
                for (int off = 0; off + C + H <= n; off += stride, ++k) {
                    REQUIRE(k < ws.size());
                    CHECK(ws[k].offset == off);
                    CHECK(ws[k].context.front() == seg[off]);
                    CHECK(ws[k].context.back() == seg[off + C - 1]);
                    CHECK(ws[k].target.front() == seg[off + C]);
                    CHECK(ws[k].target.back() == seg[off + C + H - 1]);
                }
                CHECK(k == ws.size());
            }
        }
    }

    CHECK(make_windows({1, 2, 3}, 3, 2, 1).empty());
    CHECK(make_windows({1, 2, 3, 4, 5}, 3, 2, 1).size() == 1);
    CHECK_THROWS_AS(make_windows({1, 2, 3}, 0, 1, 1), config_error);
    CHECK_THROWS_AS(make_windows({1, 2, 3}, 1, 1, 0), config_error);
}

TEST_CASE("standardize: per-window matches the hand example") {
    RawWindow w;
    w.context = {1, 2, 3};
    w.target = {4, 5};
    SeriesStats unused;
    auto p = standardize(w, StandardizationMode::PerWindow, unused);
    REQUIRE(p.has_value());
    CHECK(p->mean == doctest::Approx(2.0));
    CHECK(p->std == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    CHECK(p->std == doctest::Approx(0.8165).epsilon(1e-3));
    CHECK(p->context[0] == doctest::Approx(-1.2247).epsilon(1e-3));
    CHECK(p->context[1] == doctest::Approx(0.0));
    CHECK(p->context[2] == doctest::Approx(1.2247).epsilon(1e-3));
    // Target shares the context's statistics.
    CHECK(p->target[0] == doctest::Approx((4 - 2.0) / std::sqrt(2.0 / 3.0)).epsilon(1e-12));

    std::vector<double> back = destandardize(p->context, *p);
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i] == doctest::Approx(w.context[i]).epsilon(1e-9));
    }
}

TEST_CASE("standardize: degenerate windows") {
    RawWindow flat;
    flat.context = {5, 5, 5, 5};
    flat.target = {5, 5};
    SeriesStats unused;
    CHECK_FALSE(standardize(flat, StandardizationMode::PerWindow, unused).has_value());

    SeriesStats degenerate{5.0, 0.0};
    CHECK_THROWS_AS(standardize(flat, StandardizationMode::WholeSeries, degenerate),
                    input_error);

    SeriesStats fine{1.0, 2.0};
    auto p = standardize(flat, StandardizationMode::WholeSeries, fine);
    REQUIRE(p.has_value());
    CHECK(p->context[0] == doctest::Approx(2.0));
}

TEST_CASE("standardize: whole-series uses the supplied statistics") {
    RawWindow w;
    w.context = {10, 20};
    w.target = {30};
    SeriesStats st = compute_stats({10, 20, 30, 40});
    auto p = standardize(w, StandardizationMode::WholeSeries, st);
    REQUIRE(p.has_value());
    for (size_t i = 0; i < w.context.size(); ++i) {
        CHECK(p->context[i] == doctest::Approx((w.context[i] - st.mean) / st.std).epsilon(1e-12));
    }
    CHECK(p->target[0] == doctest::Approx((30 - st.mean) / st.std).epsilon(1e-12));
}

TEST_CASE("prepare_dataset: end to end on a time-axis dataset") {
    SeriesCollection c;
    c.name = "synthetic";
    c.context_len = 3;
    c.horizon = 2;
    c.mode = StandardizationMode::PerWindow;
    c.axis = SplitAxis::TimeAxis;
    // 20 points per series; train gets 12, val 4, test 4.
    for (int s = 0; s < 2; ++s) {
        std::vector<double> xs;
        for (int i = 0; i < 20; ++i) xs.push_back(std::sin(0.3 * i + s) + 0.1 * i);
        c.series.push_back(xs);
        c.source_ids.push_back(s);
    }

    PreparedData d = prepare_dataset(c, Rng(5));
    // Train stride 1: (12 - 5) + 1 = 8 windows per series.
    CHECK(d.train.size() == 16);
    // Eval stride defaults to the horizon: floor((4 - 5)/2) < 0 -> none fit.
    CHECK(d.val.empty());
    CHECK(d.test.empty());
    CHECK(d.skipped == std::array<int, 3>{0, 0, 0});

    PreparedData d2 = prepare_dataset(c, Rng(5), 2, 1);
    CHECK(d2.train.size() == 8);
    CHECK(d2.val.size() == 0);  // (4 - 5) still does not fit
    for (const WindowPair& w : d2.train) {
        CHECK(w.context.size() == 3);
        CHECK(w.target.size() == 2);
    }
}

TEST_CASE("prepare_dataset: whole-series statistics come from the unsplit series") {
    SeriesCollection c;
    c.name = "ws";
    c.context_len = 2;
    c.horizon = 1;
    c.mode = StandardizationMode::WholeSeries;
    c.axis = SplitAxis::TimeAxis;
    std::vector<double> xs;
    for (int i = 0; i < 15; ++i) xs.push_back(double(i * i));
    c.series = {xs};
    c.source_ids = {0};

    PreparedData d = prepare_dataset(c, Rng(9), 1, 1);
    SeriesStats st = compute_stats(xs);
    REQUIRE_FALSE(d.train.empty());
    // First train window covers xs[0..1] with target xs[2].
    CHECK(d.train[0].context[0] == doctest::Approx((xs[0] - st.mean) / st.std).epsilon(1e-12));
    CHECK(d.train[0].target[0] == doctest::Approx((xs[2] - st.mean) / st.std).epsilon(1e-12));
    // Val segment is xs[9..11]; its window must use the same full-series stats.
    REQUIRE(d.val.size() == 1);
    CHECK(d.val[0].context[0] == doctest::Approx((xs[9] - st.mean) / st.std).epsilon(1e-12));
    CHECK(d.val[0].mean == doctest::Approx(st.mean));
    CHECK(d.val[0].std == doctest::Approx(st.std));
}

TEST_CASE("prepare_dataset: constant stretches are skipped and counted") {
    SeriesCollection c;
    c.name = "flat";
    c.context_len = 3;
    c.horizon = 1;
    c.mode = StandardizationMode::PerWindow;
    c.axis = SplitAxis::TimeAxis;
    // First 12 points constant (the whole train segment), then a ramp.
    std::vector<double> xs(12, 4.0);
    for (int i = 0; i < 8; ++i) xs.push_back(double(i));
    c.series = {xs};
    c.source_ids = {0};

    PreparedData d = prepare_dataset(c, Rng(2), 1, 1);
    CHECK(d.train.empty());
    CHECK(d.skipped[0] == 9);  // (12 - 4) + 1 windows, all constant
    CHECK_FALSE(d.val.empty());
    CHECK(d.skipped[1] == 0);
}

TEST_CASE("prepare_dataset: deterministic for a fixed seed") {
    SeriesCollection c;
    c.name = "det";
    c.context_len = 2;
    c.horizon = 2;
    c.mode = StandardizationMode::WholeSeries;
    c.axis = SplitAxis::SeriesAxis;
    Rng gen(77);
    for (int s = 0; s < 8; ++s) {
        std::vector<double> xs;
        for (int i = 0; i < 12; ++i) xs.push_back(gen.next_gaussian(1.0));
        c.series.push_back(xs);
        c.source_ids.push_back(s);
    }
    PreparedData a = prepare_dataset(c, Rng(41));
    PreparedData b = prepare_dataset(c, Rng(41));
    REQUIRE(a.train.size() == b.train.size());
    for (size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].context == b.train[i].context);
        CHECK(a.train[i].source_id == b.train[i].source_id);
    }
    PreparedData d = prepare_dataset(c, Rng(42));
    bool same_sources = a.train.size() == d.train.size();
    if (same_sources) {
        for (size_t i = 0; i < a.train.size(); ++i) {
            same_sources = same_sources && a.train[i].source_id == d.train[i].source_id;
        }
    }
    CHECK_FALSE(same_sources);
}

TEST_CASE("mode and axis name round-trips") {
    CHECK(standardization_mode_from_string(to_string(StandardizationMode::PerWindow)) ==
          StandardizationMode::PerWindow);
    CHECK(standardization_mode_from_string(to_string(StandardizationMode::WholeSeries)) ==
          StandardizationMode::WholeSeries);
    CHECK(split_axis_from_string(to_string(SplitAxis::TimeAxis)) == SplitAxis::TimeAxis);
    CHECK(split_axis_from_string(to_string(SplitAxis::SeriesAxis)) == SplitAxis::SeriesAxis);
    for (SubsampleRule r :
         {SubsampleRule::None, SubsampleRule::TruncateLong, SubsampleRule::SampleSeries}) {
        CHECK(subsample_rule_from_string(to_string(r)) == r);
    }
    CHECK_THROWS_AS(standardization_mode_from_string("zscore"), config_error);
    CHECK_THROWS_AS(split_axis_from_string("both"), config_error);
    CHECK_THROWS_AS(subsample_rule_from_string("half"), config_error);
}
