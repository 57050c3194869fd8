#include "unicast/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "unicast/errors.hpp"

namespace unicast {

namespace {

constexpr int kTruncateKeep = 15000;
constexpr int kSampleKeep = 100;
constexpr double kStdFloor = 1e-8;

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_value(const std::string& field, int line_no) {
    std::string f = trim(field);
    if (f.empty()) {
        throw input_error("empty value field on line " + std::to_string(line_no));
    }
    size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(f, &pos);
    } catch (const std::exception&) {
        throw input_error("cannot parse '" + f + "' as a number on line " +
                          std::to_string(line_no));
    }
    if (pos != f.size()) {
        throw input_error("trailing junk in '" + f + "' on line " + std::to_string(line_no));
    }
    if (!std::isfinite(v)) {
        throw input_error("non-finite value on line " + std::to_string(line_no));
    }
    return v;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

void check_series_lengths(const SeriesCollection& c) {
    for (size_t i = 0; i < c.series.size(); ++i) {
        if (c.series[i].size() < 2) {
            throw input_error("series " + std::to_string(i) + " of '" + c.name +
                              "' has fewer than 2 points");
        }
    }
}

std::string basename_no_ext(const std::string& path) {
    size_t slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    size_t dot = base.find_last_of('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
}

SeriesCollection load_csv_wide(std::istream& in, const std::string& path) {
    SeriesCollection c;
    c.name = basename_no_ext(path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        for (const std::string& field : split_fields(line)) {
            row.push_back(parse_value(field, line_no));
        }
        c.series.push_back(std::move(row));
    }
    return c;
}

SeriesCollection load_csv_long(std::istream& in, const std::string& path) {
    SeriesCollection c;
    c.name = basename_no_ext(path);
    std::unordered_map<std::string, size_t> index;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> fields = split_fields(line);
        if (fields.size() != 2) {
            throw input_error("expected 'id,value' on line " + std::to_string(line_no) +
                              ", got " + std::to_string(fields.size()) + " fields");
        }
        std::string id = trim(fields[0]);
        if (id.empty()) {
            throw input_error("empty series id on line " + std::to_string(line_no));
        }
        double v = parse_value(fields[1], line_no);
        auto it = index.find(id);
        if (it == index.end()) {
            index.emplace(id, c.series.size());
            c.series.push_back({v});
        } else {
            c.series[it->second].push_back(v);
        }
    }
    return c;
}

SeriesCollection load_jsonl(std::istream& in, const std::string& path) {
    SeriesCollection c;
    c.name = basename_no_ext(path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw input_error("bad json on line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("values") || !j["values"].is_array()) {
            throw input_error("line " + std::to_string(line_no) +
                              " needs an object with a 'values' array");
        }
        std::vector<double> row;
        for (const auto& el : j["values"]) {
            if (!el.is_number()) {
                throw input_error("non-numeric entry in 'values' on line " +
                                  std::to_string(line_no));
            }
            double v = el.get<double>();
            if (!std::isfinite(v)) {
                throw input_error("non-finite value on line " + std::to_string(line_no));
            }
            row.push_back(v);
        }
        c.series.push_back(std::move(row));
    }
    return c;
}

}  // namespace

std::string to_string(StandardizationMode mode) {
    return mode == StandardizationMode::PerWindow ? "per_window" : "whole_series";
}

std::string to_string(SplitAxis axis) {
    return axis == SplitAxis::TimeAxis ? "time" : "series";
}

std::string to_string(SubsampleRule rule) {
    switch (rule) {
        case SubsampleRule::None: return "none";
        case SubsampleRule::TruncateLong: return "truncate_long";
        case SubsampleRule::SampleSeries: return "sample_series";
    }
    throw contract_error("unhandled subsample rule");
}

StandardizationMode standardization_mode_from_string(const std::string& s) {
    if (s == "per_window") return StandardizationMode::PerWindow;
    if (s == "whole_series") return StandardizationMode::WholeSeries;
    throw config_error("unknown standardization mode '" + s + "'");
}

SplitAxis split_axis_from_string(const std::string& s) {
    if (s == "time") return SplitAxis::TimeAxis;
    if (s == "series") return SplitAxis::SeriesAxis;
    throw config_error("unknown split axis '" + s + "'");
}

SubsampleRule subsample_rule_from_string(const std::string& s) {
    if (s == "none") return SubsampleRule::None;
    if (s == "truncate_long") return SubsampleRule::TruncateLong;
    if (s == "sample_series") return SubsampleRule::SampleSeries;
    throw config_error("unknown subsample rule '" + s + "'");
}

std::string to_string(InputSchema schema) {
    switch (schema) {
        case InputSchema::CsvWide: return "csv_wide";
        case InputSchema::CsvLong: return "csv_long";
        case InputSchema::Jsonl: return "jsonl";
    }
    throw contract_error("unhandled input schema");
}

InputSchema input_schema_from_string(const std::string& s) {
    if (s == "csv_wide") return InputSchema::CsvWide;
    if (s == "csv_long") return InputSchema::CsvLong;
    if (s == "jsonl") return InputSchema::Jsonl;
    throw config_error("unknown input schema '" + s + "'");
}

SeriesCollection load_collection(const std::string& path, InputSchema schema) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open '" + path + "'");
    SeriesCollection c;
    switch (schema) {
        case InputSchema::CsvWide: c = load_csv_wide(in, path); break;
        case InputSchema::CsvLong: c = load_csv_long(in, path); break;
        case InputSchema::Jsonl: c = load_jsonl(in, path); break;
    }
    if (c.series.empty()) {
        throw input_error("'" + path + "' holds no series");
    }
    check_series_lengths(c);
    c.source_ids.resize(c.series.size());
    std::iota(c.source_ids.begin(), c.source_ids.end(), 0);
    return c;
}

std::optional<DatasetPreset> dataset_preset(const std::string& name) {
    const StandardizationMode pw = StandardizationMode::PerWindow;
    const StandardizationMode ws = StandardizationMode::WholeSeries;
    const SplitAxis time = SplitAxis::TimeAxis;
    const SplitAxis ser = SplitAxis::SeriesAxis;
    if (name == "covid") return DatasetPreset{30, ws, ser, SubsampleRule::None};
    if (name == "nn5") return DatasetPreset{56, pw, time, SubsampleRule::None};
    if (name == "car_parts") return DatasetPreset{12, ws, ser, SubsampleRule::None};
    if (name == "au_elec") return DatasetPreset{48, pw, time, SubsampleRule::TruncateLong};
    if (name == "cif2016") return DatasetPreset{12, ws, ser, SubsampleRule::None};
    if (name == "dominick") return DatasetPreset{8, pw, time, SubsampleRule::SampleSeries};
    if (name == "hospital") return DatasetPreset{12, ws, ser, SubsampleRule::None};
    if (name == "tourism") return DatasetPreset{24, ws, ser, SubsampleRule::None};
    return std::nullopt;
}

void apply_preset(SeriesCollection& c) {
    std::optional<DatasetPreset> p = dataset_preset(c.name);
    if (!p) throw config_error("no preset for dataset '" + c.name + "'");
    c.context_len = p->context_len;
    c.horizon = p->context_len;
    c.mode = p->mode;
    c.axis = p->axis;
    c.subsample = p->subsample;
}

SeriesCollection apply_subsample(const SeriesCollection& c, const Rng& rng) {
    if (c.subsample == SubsampleRule::None) return c;
    SeriesCollection out = c;
    if (c.subsample == SubsampleRule::TruncateLong) {
        for (auto& s : out.series) {
            if (s.size() > static_cast<size_t>(kTruncateKeep)) s.resize(kTruncateKeep);
        }
        return out;
    }
    // SampleSeries
    if (c.series.size() < static_cast<size_t>(kSampleKeep)) {
        throw config_error("sample_series wants " + std::to_string(kSampleKeep) +
                           " series but '" + c.name + "' has " +
                           std::to_string(c.series.size()));
    }
    std::vector<int> idx(c.series.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng child = rng.split("subsample");
    child.shuffle(idx);
    idx.resize(kSampleKeep);
    std::sort(idx.begin(), idx.end());
    out.series.clear();
    out.source_ids.clear();
    for (int i : idx) {
        out.series.push_back(c.series[i]);
        out.source_ids.push_back(c.source_ids.empty() ? i : c.source_ids[i]);
    }
    return out;
}

SplitResult split(const SeriesCollection& c, const Rng& rng) {
    SplitResult r;
    r.train = c;
    r.val = c;
    r.test = c;
    r.train.series.clear();
    r.val.series.clear();
    r.test.series.clear();
    r.train.source_ids.clear();
    r.val.source_ids.clear();
    r.test.source_ids.clear();

    auto src = [&](size_t i) {
        return c.source_ids.empty() ? static_cast<int>(i) : c.source_ids[i];
    };

    if (c.axis == SplitAxis::TimeAxis) {
        for (size_t i = 0; i < c.series.size(); ++i) {
            const std::vector<double>& s = c.series[i];
            int n = static_cast<int>(s.size());
            if (n < 5) {
                throw input_error("series " + std::to_string(i) + " of '" + c.name +
                                  "' has " + std::to_string(n) +
                                  " points, need at least 5 to split in time");
            }
            int cut1 = n * 6 / 10;
            int cut2 = n * 8 / 10;
            r.train.series.emplace_back(s.begin(), s.begin() + cut1);
            r.val.series.emplace_back(s.begin() + cut1, s.begin() + cut2);
            r.test.series.emplace_back(s.begin() + cut2, s.end());
            r.train.source_ids.push_back(src(i));
            r.val.source_ids.push_back(src(i));
            r.test.source_ids.push_back(src(i));
        }
        return r;
    }

    int m = static_cast<int>(c.series.size());
    if (m < 5) {
        throw input_error("'" + c.name + "' has " + std::to_string(m) +
                          " series, need at least 5 to split by series");
    }
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    Rng child = rng.split("series_split");
    child.shuffle(order);
    int n_train = m * 6 / 10;
    int n_val = m * 8 / 10 - n_train;
    for (int k = 0; k < m; ++k) {
        int i = order[k];
        SeriesCollection& dst = k < n_train ? r.train : (k < n_train + n_val ? r.val : r.test);
        dst.series.push_back(c.series[i]);
        dst.source_ids.push_back(src(i));
    }
    return r;
}

std::vector<RawWindow> make_windows(const std::vector<double>& segment, int context_len,
                                    int horizon, int stride, int source_id) {
    if (context_len < 1 || horizon < 1) {
        throw config_error("window needs context_len >= 1 and horizon >= 1, got " +
                           std::to_string(context_len) + " and " + std::to_string(horizon));
    }
    if (stride < 1) throw config_error("window stride must be >= 1, got " + std::to_string(stride));
    std::vector<RawWindow> out;
    int n = static_cast<int>(segment.size());
    int span = context_len + horizon;
    if (n < span) return out;
    for (int off = 0; off + span <= n; off += stride) {
        RawWindow w;
        w.context.assign(segment.begin() + off, segment.begin() + off + context_len);
        w.target.assign(segment.begin() + off + context_len, segment.begin() + off + span);
        w.source_id = source_id;
        w.offset = off;
        out.push_back(std::move(w));
    }
    return out;
}

SeriesStats compute_stats(const std::vector<double>& xs) {
    if (xs.empty()) throw input_error("cannot take statistics of an empty series");
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return SeriesStats{mean, std::sqrt(var)};
}

std::optional<WindowPair> standardize(const RawWindow& w, StandardizationMode mode,
                                      const SeriesStats& series_stats) {
    SeriesStats st;
    if (mode == StandardizationMode::PerWindow) {
        st = compute_stats(w.context);
        if (st.std <= kStdFloor) return std::nullopt;
    } else {
        st = series_stats;
        if (st.std <= kStdFloor) {
            throw input_error("series " + std::to_string(w.source_id) +
                              " is constant, whole-series standardization is undefined");
        }
    }
    WindowPair p;
    p.mean = st.mean;
    p.std = st.std;
    p.source_id = w.source_id;
    p.offset = w.offset;
    p.context.reserve(w.context.size());
    p.target.reserve(w.target.size());
    for (double x : w.context) p.context.push_back((x - st.mean) / st.std);
    for (double x : w.target) p.target.push_back((x - st.mean) / st.std);
    return p;
}

std::vector<double> destandardize(const std::vector<double>& values, const WindowPair& w) {
    std::vector<double> out;
    out.reserve(values.size());
    for (double z : values) out.push_back(z * w.std + w.mean);
    return out;
}

PreparedData prepare_dataset(const SeriesCollection& c, const Rng& rng, int train_stride,
                             int eval_stride) {
    if (c.context_len < 1 || c.horizon < 1) {
        throw config_error("dataset '" + c.name + "' needs context_len and horizon set");
    }
    if (train_stride < 0 || eval_stride < 0) {
        throw config_error("strides must be positive (or 0 for the default)");
    }
    int ts = train_stride == 0 ? 1 : train_stride;
    int es = eval_stride == 0 ? c.horizon : eval_stride;

    SeriesCollection sub = apply_subsample(c, rng);

    // Whole-series statistics come from the raw series before splitting, so
    // a window keeps the same normalization wherever the cut lands.
    std::unordered_map<int, SeriesStats> stats;
    for (size_t i = 0; i < sub.series.size(); ++i) {
        int id = sub.source_ids.empty() ? static_cast<int>(i) : sub.source_ids[i];
        stats.emplace(id, compute_stats(sub.series[i]));
    }

    SplitResult sp = split(sub, rng);

    PreparedData out;
    const SeriesCollection* parts[3] = {&sp.train, &sp.val, &sp.test};
    std::vector<WindowPair>* dests[3] = {&out.train, &out.val, &out.test};
    for (int part = 0; part < 3; ++part) {
        int stride = part == 0 ? ts : es;
        const SeriesCollection& seg = *parts[part];
        for (size_t i = 0; i < seg.series.size(); ++i) {
            int id = seg.source_ids.empty() ? static_cast<int>(i) : seg.source_ids[i];
            for (const RawWindow& w :
                 make_windows(seg.series[i], c.context_len, c.horizon, stride, id)) {
                std::optional<WindowPair> p = standardize(w, c.mode, stats.at(id));
                if (p) {
                    dests[part]->push_back(std::move(*p));
                } else {
                    ++out.skipped[part];
                }
            }
        }
    }
    return out;
}

}  // namespace unicast
