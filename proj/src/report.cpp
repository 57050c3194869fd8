#include "unicast/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "unicast/errors.hpp"
#include "unicast/transformer.hpp"

namespace unicast {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct BackboneDims {
    const char* name;
    int num_layers;
    int width;
    int prompt_length;
};

// Full-scale dims. Layer counts and widths are the unique integer solution
// of count_trainable against the published per-configuration counts; the
// derivation column of the emitted table shows the arithmetic per row.
const BackboneDims kVisionBackbones[] = {
    {"clip", 12, 768, 10},
    {"blip", 12, 768, 10},
};
const BackboneDims kTextBackbones[] = {
    {"qwen", 28, 1536, 4},
    {"llama", 32, 4096, 4},
};
const BackboneDims kTsfmBackbones[] = {
    {"timer", 8, 1024, 4},
    {"chronos", 12, 768, 4},
};

// Published forecaster-only parameter counts.
const int64_t kTimerTotal = 84142080;
const int64_t kChronosTotal = 205292928;

struct PresetRowSpec {
    const char* tsfm;
    const char* vision;
    const char* text;
    int64_t published_total;
};

// Published whole-model totals per configuration. Totals are inputs taken
// as given; only the trainable column is recomputed.
const PresetRowSpec kPresetRows[] = {
    {"timer", "clip", "", 172510464},
    {"timer", "blip", "", 171144960},
    {"timer", "", "qwen", 1629635072},
    {"timer", "", "llama", 6696238080},
    {"timer", "clip", "qwen", 1717970688},
    {"timer", "clip", "llama", 6784573696},
    {"timer", "blip", "qwen", 1716605184},
    {"timer", "blip", "llama", 6783208192},
    {"chronos", "clip", "", 293468544},
    {"chronos", "blip", "", 292103040},
    {"chronos", "", "qwen", 1750396544},
    {"chronos", "clip", "qwen", 1838535296},
    {"chronos", "blip", "llama", 6903117440},
};

const BackboneDims* find_dims(const BackboneDims* table, size_t n, const std::string& name) {
    for (size_t i = 0; i < n; ++i) {
        if (name == table[i].name) return &table[i];
    }
    return nullptr;
}

int64_t backbone_total(const std::string& tsfm) {
    if (tsfm == "timer") return kTimerTotal;
    if (tsfm == "chronos") return kChronosTotal;
    throw config_error("unknown forecaster backbone '" + tsfm + "'");
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt2(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

void apply_level(AblationAxis axis, const std::string& level, ModelSpec& ms, TrainConfig& tc) {
    switch (axis) {
        case AblationAxis::Modality: {
            if (level == "none") {
                ms.use_vision = false;
                ms.use_text = false;
            } else if (level == "vision") {
                ms.use_vision = true;
                ms.use_text = false;
            } else if (level == "text") {
                ms.use_vision = false;
                ms.use_text = true;
            } else if (level == "vision+text") {
                ms.use_vision = true;
                ms.use_text = true;
            } else {
                throw config_error("unknown modality level '" + level + "'");
            }
            return;
        }
        case AblationAxis::PromptLocation: {
            PromptVariant v = prompt_variant_from_string(level);
            ms.vision_schedule = v;
            ms.text_schedule = v;
            ms.ts_schedule = v;
            return;
        }
        case AblationAxis::PromptLength: {
            size_t colon = level.find(':');
            if (colon == std::string::npos) {
                throw config_error("prompt length level must be component:length, got '" +
                                   level + "'");
            }
            std::string comp = level.substr(0, colon);
            int len = 0;
            try {
                len = std::stoi(level.substr(colon + 1));
            } catch (const std::exception&) {
                throw config_error("bad prompt length in '" + level + "'");
            }
            if (len < 0) throw config_error("prompt length must be >= 0");
            if (comp == "vision") ms.vision_prompt_len = len;
            else if (comp == "text") ms.text_prompt_len = len;
            else if (comp == "tsfm") ms.ts_prompt_len = len;
            else throw config_error("unknown component '" + comp + "'");
            return;
        }
        case AblationAxis::DataVolume: {
            try {
                tc.data_fraction = std::stod(level);
            } catch (const std::exception&) {
                throw config_error("bad data volume level '" + level + "'");
            }
            return;
        }
        case AblationAxis::Epochs:
            return;  // rows come from the epoch history, nothing to set
    }
    throw contract_error("unhandled ablation axis");
}

}  // namespace

int64_t count_trainable(const ArchSpec& spec) {
    int64_t d_ts = spec.tsfm.width;
    int64_t total = 0;
    if (spec.vision.present) {
        total += int64_t(spec.vision.num_layers) * spec.vision.prompt_length * spec.vision.width;
    }
    if (spec.interact_vision) total += int64_t(spec.vision.width) * d_ts + d_ts;
    if (spec.text.present) {
        total += int64_t(spec.text.num_layers) * spec.text.prompt_length * spec.text.width;
    }
    if (spec.interact_text) total += int64_t(spec.text.width) * d_ts + d_ts;
    total += int64_t(spec.tsfm.num_layers) * spec.tsfm.prompt_length * d_ts;
    return total;
}

std::string count_derivation(const ArchSpec& spec) {
    std::ostringstream os;
    bool first = true;
    auto plus = [&] {
        if (!first) os << " + ";
        first = false;
    };
    auto component = [&](const PromptedComponent& c, bool interact) {
        if (c.present) {
            plus();
            os << c.num_layers << "*" << c.prompt_length << "*" << c.width;
        }
        if (interact) {
            plus();
            os << "(" << c.width << "*" << spec.tsfm.width << " + " << spec.tsfm.width << ")";
        }
    };
    component(spec.vision, spec.interact_vision);
    component(spec.text, spec.interact_text);
    plus();
    os << spec.tsfm.num_layers << "*" << spec.tsfm.prompt_length << "*" << spec.tsfm.width;
    os << " = " << count_trainable(spec);
    return os.str();
}

ArchSpec arch_from_model_spec(const ModelSpec& spec) {
    ArchSpec a;
    a.tsfm = {true, spec.ts_layers, spec.d_ts, spec.ts_prompt_len};
    if (spec.use_vision) {
        a.vision = {true, spec.vision_layers, spec.d_v, spec.vision_prompt_len};
        a.interact_vision = true;
    }
    if (spec.use_text) {
        a.text = {true, spec.text_layers, spec.d_t, spec.text_prompt_len};
        a.interact_text = true;
    }
    return a;
}

ArchSpec preset_arch(const std::string& tsfm, const std::string& vision,
                     const std::string& text) {
    const BackboneDims* ts = find_dims(kTsfmBackbones, 2, tsfm);
    if (!ts) throw config_error("unknown forecaster backbone '" + tsfm + "'");
    ArchSpec a;
    a.tsfm = {true, ts->num_layers, ts->width, ts->prompt_length};
    if (!vision.empty()) {
        const BackboneDims* v = find_dims(kVisionBackbones, 2, vision);
        if (!v) throw config_error("unknown vision backbone '" + vision + "'");
        a.vision = {true, v->num_layers, v->width, v->prompt_length};
        a.interact_vision = true;
    }
    if (!text.empty()) {
        const BackboneDims* t = find_dims(kTextBackbones, 2, text);
        if (!t) throw config_error("unknown text backbone '" + text + "'");
        a.text = {true, t->num_layers, t->width, t->prompt_length};
        a.interact_text = true;
    }
    return a;
}

EfficiencyRow efficiency_row(const std::string& tsfm, const std::string& vision,
                             const std::string& text, int64_t total, int64_t backbone) {
    if (total <= 0) throw input_error("total parameter count must be positive");
    if (backbone <= 0) throw input_error("backbone parameter count must be positive");
    ArchSpec arch = preset_arch(tsfm, vision, text);
    EfficiencyRow row;
    row.tsfm = tsfm;
    row.vision = vision;
    row.text = text;
    row.trainable = count_trainable(arch);
    row.total = total;
    row.backbone_total = backbone;
    row.ratio_pct = 100.0 * static_cast<double>(row.trainable) / static_cast<double>(total);
    row.relative_pct =
        100.0 * static_cast<double>(row.trainable) / static_cast<double>(backbone);
    row.derivation = count_derivation(arch);
    return row;
}

std::vector<EfficiencyRow> preset_efficiency_table() {
    std::vector<EfficiencyRow> rows;
    for (const PresetRowSpec& r : kPresetRows) {
        rows.push_back(
            efficiency_row(r.tsfm, r.vision, r.text, r.published_total, backbone_total(r.tsfm)));
    }
    return rows;
}

std::string format_with_commas(int64_t v) {
    std::string digits = std::to_string(v < 0 ? -v : v);
    std::string out;
    int count = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (count && count % 3 == 0) out += ',';
        out += *it;
        ++count;
    }
    if (v < 0) out += '-';
    std::reverse(out.begin(), out.end());
    return out;
}

std::string format_efficiency_text(const std::vector<EfficiencyRow>& rows) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-9s %-7s %-7s %16s %18s %8s %10s\n", "tsfm", "vision",
                  "text", "trainable", "total", "ratio%", "relative%");
    os << line;
    for (const EfficiencyRow& r : rows) {
        std::snprintf(line, sizeof(line), "%-9s %-7s %-7s %16s %18s %8s %10s\n", r.tsfm.c_str(),
                      r.vision.empty() ? "-" : r.vision.c_str(),
                      r.text.empty() ? "-" : r.text.c_str(),
                      format_with_commas(r.trainable).c_str(),
                      format_with_commas(r.total).c_str(), fmt2(r.ratio_pct).c_str(),
                      fmt2(r.relative_pct).c_str());
        os << line;
    }
    return os.str();
}

void write_efficiency_csv(const std::vector<EfficiencyRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write '" + path + "'");
    out << "tsfm,vision,text,trainable,total,backbone_total,ratio_pct,relative_pct,derivation\n";
    for (const EfficiencyRow& r : rows) {
        out << r.tsfm << ',' << r.vision << ',' << r.text << ',' << r.trainable << ','
            << r.total << ',' << r.backbone_total << ',' << fmt2(r.ratio_pct) << ','
            << fmt2(r.relative_pct) << ',' << csv_quote(r.derivation) << '\n';
    }
}

double evaluate(const UniCastModel& model, const std::vector<WindowPair>& windows,
                const DatasetDescription& description) {
    if (windows.empty()) throw input_error("evaluate needs at least one window");
    return validation_mse(model, windows, description);
}

std::string to_string(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::Modality: return "modality";
        case AblationAxis::PromptLocation: return "location";
        case AblationAxis::PromptLength: return "length";
        case AblationAxis::Epochs: return "epochs";
        case AblationAxis::DataVolume: return "volume";
    }
    throw contract_error("unhandled ablation axis");
}

AblationAxis ablation_axis_from_string(const std::string& s) {
    if (s == "modality") return AblationAxis::Modality;
    if (s == "location") return AblationAxis::PromptLocation;
    if (s == "length") return AblationAxis::PromptLength;
    if (s == "epochs") return AblationAxis::Epochs;
    if (s == "volume") return AblationAxis::DataVolume;
    throw config_error("unknown ablation axis '" + s + "'");
}

std::vector<std::string> default_levels(AblationAxis axis, const std::string& component) {
    switch (axis) {
        case AblationAxis::Modality:
            return {"none", "vision", "text", "vision+text"};
        case AblationAxis::PromptLocation:
            return {"first", "odd", "top_half", "all"};
        case AblationAxis::PromptLength: {
            std::vector<std::string> comps;
            if (component.empty()) {
                comps = {"vision", "text", "tsfm"};
            } else {
                if (component != "vision" && component != "text" && component != "tsfm") {
                    throw config_error("unknown component '" + component + "'");
                }
                comps = {component};
            }
            std::vector<std::string> levels;
            for (const std::string& c : comps) {
                for (int len : {4, 10, 16}) levels.push_back(c + ":" + std::to_string(len));
            }
            return levels;
        }
        case AblationAxis::Epochs:
            return {};
        case AblationAxis::DataVolume:
            return {"0.25", "0.5", "0.75", "1"};
    }
    throw contract_error("unhandled ablation axis");
}

RunReport run_ablation(const AblationGrid& grid) {
    RunReport report;
    report.axis = grid.axis;
    report.seed = grid.seed;
    DatasetDescription desc{grid.description_text};

    if (grid.axis == AblationAxis::Epochs) {
        AblationRow base;
        base.level = "0";
        try {
            UniCastModel model = build_model(grid.base_model, grid.seed);
            TrainConfig tc = grid.base_train;
            tc.seed = grid.seed;
            tc.description_text = grid.description_text;
            int64_t trainable = trainable_scalar_count(model);
            double zs_val = validation_mse(model, grid.data.val, desc);
            double zs_test = validation_mse(model, grid.data.test, desc);
            TrainHistory h = train(model, grid.data.train, grid.data.val, tc);
            for (size_t k = 0; k < h.val_mse.size(); ++k) {
                AblationRow row;
                row.level = std::to_string(k + 1);
                row.zs_val_mse = zs_val;
                row.zs_test_mse = zs_test;
                row.val_mse = h.val_mse[k];
                row.test_mse = kNaN;
                row.trainable_params = trainable;
                row.seconds = h.seconds[k];
                if (k + 1 == h.val_mse.size() && !grid.data.test.empty() && !h.diverged) {
                    row.test_mse = evaluate(model, grid.data.test, desc);
                }
                report.rows.push_back(std::move(row));
            }
        } catch (const std::exception& e) {
            base.error = e.what();
            report.rows.push_back(std::move(base));
        }
        return report;
    }

    std::vector<std::string> levels =
        grid.levels.empty() ? default_levels(grid.axis) : grid.levels;
    for (const std::string& level : levels) {
        AblationRow row;
        row.level = level;
        try {
            ModelSpec ms = grid.base_model;
            TrainConfig tc = grid.base_train;
            tc.seed = grid.seed;
            tc.description_text = grid.description_text;
            apply_level(grid.axis, level, ms, tc);
            UniCastModel model = build_model(ms, grid.seed);
            row.trainable_params = trainable_scalar_count(model);
            row.zs_val_mse = validation_mse(model, grid.data.val, desc);
            row.zs_test_mse = validation_mse(model, grid.data.test, desc);
            TrainHistory h = train(model, grid.data.train, grid.data.val, tc);
            row.seconds = std::accumulate(h.seconds.begin(), h.seconds.end(), 0.0);
            row.val_mse = h.val_mse.empty() ? kNaN : h.val_mse.back();
            row.test_mse =
                grid.data.test.empty() ? kNaN : evaluate(model, grid.data.test, desc);
            if (h.diverged) row.error = "diverged";
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

void write_report_csv(const RunReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write '" + path + "'");
    out << "level,zs_val_mse,zs_test_mse,val_mse,test_mse,trainable_params,error\n";
    for (const AblationRow& r : report.rows) {
        out << csv_quote(r.level) << ',' << fmt17(r.zs_val_mse) << ',' << fmt17(r.zs_test_mse)
            << ',' << fmt17(r.val_mse) << ',' << fmt17(r.test_mse) << ',' << r.trainable_params
            << ',' << csv_quote(r.error) << '\n';
    }
}

void write_report_json(const RunReport& report, const std::string& path) {
    nlohmann::json rows = nlohmann::json::array();
    for (const AblationRow& r : report.rows) {
        rows.push_back({{"level", r.level},
                        {"zs_val_mse", r.zs_val_mse},
                        {"zs_test_mse", r.zs_test_mse},
                        {"val_mse", r.val_mse},
                        {"test_mse", r.test_mse},
                        {"trainable_params", r.trainable_params},
                        {"seconds", r.seconds},
                        {"error", r.error}});
    }
    nlohmann::json j = {{"schema_version", 1},
                        {"axis", to_string(report.axis)},
                        {"seed", report.seed},
                        {"rows", rows}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

std::string format_report_text(const RunReport& report) {
    std::ostringstream os;
    os << "axis: " << to_string(report.axis) << "  seed: " << report.seed << "\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-14s %12s %12s %12s %12s %12s  %s\n", "level", "zs_val",
                  "zs_test", "val", "test", "trainable", "status");
    os << line;
    for (const AblationRow& r : report.rows) {
        char zv[32], zt[32], v[32], t[32];
        std::snprintf(zv, sizeof(zv), "%.5g", r.zs_val_mse);
        std::snprintf(zt, sizeof(zt), "%.5g", r.zs_test_mse);
        std::snprintf(v, sizeof(v), "%.5g", r.val_mse);
        std::snprintf(t, sizeof(t), "%.5g", r.test_mse);
        std::snprintf(line, sizeof(line), "%-14s %12s %12s %12s %12s %12s  %s\n",
                      r.level.c_str(), zv, zt, v, t,
                      format_with_commas(r.trainable_params).c_str(),
                      r.error.empty() ? "ok" : r.error.c_str());
        os << line;
    }
    return os.str();
}

void write_line_chart_svg(const std::vector<double>& xs, const std::vector<double>& ys,
                          const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::string& path) {
    if (xs.size() != ys.size()) {
        throw dimension_error("chart needs matching x and y lengths, got " +
                              std::to_string(xs.size()) + " and " + std::to_string(ys.size()));
    }
    if (xs.empty()) throw input_error("chart needs at least one point");
    for (double v : ys) {
        if (!std::isfinite(v)) throw input_error("chart values must be finite");
    }

    const double kW = 640, kH = 400;
    const double kL = 64, kR = 20, kT = 44, kB = 52;
    double xmin = *std::min_element(xs.begin(), xs.end());
    double xmax = *std::max_element(xs.begin(), xs.end());
    double ymin = *std::min_element(ys.begin(), ys.end());
    double ymax = *std::max_element(ys.begin(), ys.end());
    if (xmax == xmin) {
        xmin -= 1;
        xmax += 1;
    }
    if (ymax == ymin) {
        ymin -= 1;
        ymax += 1;
    }
    double xpad = 0.04 * (xmax - xmin);
    double ypad = 0.08 * (ymax - ymin);
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR); };
    auto py = [&](double y) { return kH - kB - (y - ymin) / (ymax - ymin) * (kH - kT - kB); };
    auto f2 = [](double v) {
        char b[32];
        std::snprintf(b, sizeof(b), "%.2f", v);
        return std::string(b);
    };
    auto f4 = [](double v) {
        char b[32];
        std::snprintf(b, sizeof(b), "%.4g", v);
        return std::string(b);
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
          "viewBox=\"0 0 640 400\">\n";
    os << "<rect width=\"640\" height=\"400\" fill=\"#ffffff\"/>\n";
    os << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"15\">"
       << title << "</text>\n";
    // Axes.
    os << "<line x1=\"" << f2(kL) << "\" y1=\"" << f2(kT) << "\" x2=\"" << f2(kL) << "\" y2=\""
       << f2(kH - kB) << "\" stroke=\"#444444\"/>\n";
    os << "<line x1=\"" << f2(kL) << "\" y1=\"" << f2(kH - kB) << "\" x2=\"" << f2(kW - kR)
       << "\" y2=\"" << f2(kH - kB) << "\" stroke=\"#444444\"/>\n";
    // Ticks.
    for (int i = 0; i <= 4; ++i) {
        double xv = xmin + (xmax - xmin) * i / 4.0;
        double yv = ymin + (ymax - ymin) * i / 4.0;
        double xp = px(xv), yp = py(yv);
        os << "<line x1=\"" << f2(xp) << "\" y1=\"" << f2(kH - kB) << "\" x2=\"" << f2(xp)
           << "\" y2=\"" << f2(kH - kB + 5) << "\" stroke=\"#444444\"/>\n";
        os << "<text x=\"" << f2(xp) << "\" y=\"" << f2(kH - kB + 18)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << f4(xv)
           << "</text>\n";
        os << "<line x1=\"" << f2(kL - 5) << "\" y1=\"" << f2(yp) << "\" x2=\"" << f2(kL)
           << "\" y2=\"" << f2(yp) << "\" stroke=\"#444444\"/>\n";
        os << "<text x=\"" << f2(kL - 8) << "\" y=\"" << f2(yp + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << f4(yv)
           << "</text>\n";
    }
    // Axis labels.
    os << "<text x=\"" << f2((kL + kW - kR) / 2) << "\" y=\"" << f2(kH - 14)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
       << "</text>\n";
    os << "<text x=\"16\" y=\"" << f2((kT + kH - kB) / 2)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
          "transform=\"rotate(-90 16 "
       << f2((kT + kH - kB) / 2) << ")\">" << y_label << "</text>\n";
    // Data.
    if (xs.size() > 1) {
        os << "<polyline fill=\"none\" stroke=\"#2266aa\" stroke-width=\"2\" points=\"";
        for (size_t i = 0; i < xs.size(); ++i) {
            if (i) os << ' ';
            os << f2(px(xs[i])) << ',' << f2(py(ys[i]));
        }
        os << "\"/>\n";
    }
    for (size_t i = 0; i < xs.size(); ++i) {
        os << "<circle cx=\"" << f2(px(xs[i])) << "\" cy=\"" << f2(py(ys[i]))
           << "\" r=\"3\" fill=\"#2266aa\"/>\n";
    }
    os << "</svg>\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write '" + path + "'");
    out << os.str();
}

std::string artifact_stem(const std::string& experiment, const std::string& stamp,
                          uint64_t seed) {
    return experiment + "_" + stamp + "_" + std::to_string(seed);
}

}  // namespace unicast
