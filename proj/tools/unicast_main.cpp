// Command-line front end. Every command resolves one RunConfig (file +
// overrides), derives all randomness from its single seed, and writes its
// artifacts into {out_root}/{command}_{stamp}_{seed}/ next to a config
// snapshot that reproduces the run.
//
// Exit codes: 0 success, 1 runtime fault, 2 config or usage error.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unicast/chart.hpp"
#include "unicast/config.hpp"
#include "unicast/errors.hpp"
#include "unicast/model.hpp"
#include "unicast/report.hpp"
#include "unicast/synth.hpp"
#include "unicast/train.hpp"

namespace {

using namespace unicast;

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> stamp;
};

std::string now_stamp() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", &tm);
    return buf;
}

// Precedence: --out flag, then UNICAST_OUT_ROOT, then the config file.
std::string resolve_out_root(const CommonOpts& opts, const std::string& config_default) {
    if (opts.out) return *opts.out;
    if (const char* env = std::getenv("UNICAST_OUT_ROOT")) return env;
    return config_default;
}

RunConfig load_with_overrides(const CommonOpts& opts) {
    RunConfig c = load_run_config(opts.config_path);
    if (opts.seed) {
        c.seed = *opts.seed;
        c.train.seed = *opts.seed;
    }
    c.out_dir = resolve_out_root(opts, c.out_dir);
    return c;
}

std::string make_run_dir(const std::string& root, const std::string& experiment,
                         const std::string& stamp, uint64_t seed) {
    std::string dir = root + "/" + artifact_stem(experiment, stamp, seed);
    std::filesystem::create_directories(dir);
    return dir;
}

int run_train(const CommonOpts& opts) {
    RunConfig c = load_with_overrides(opts);
    std::string dir = make_run_dir(c.out_dir, "train", opts.stamp.value_or(now_stamp()), c.seed);
    write_config_snapshot(c, dir + "/config.json");

    PreparedData data = build_dataset(c);
    UniCastModel model = build_model(c.model, c.seed);
    std::cout << "train: " << data.train.size() << " train / " << data.val.size()
              << " val windows, " << trainable_scalar_count(model)
              << " trainable scalars\n";

    TrainHistory h = train(model, data.train, data.val, c.train);
    save_model(model, dir + "/model.json");
    write_history_csv(h, dir + "/history.csv");
    write_history_json(h, c.train, dir + "/history.json");

    for (size_t i = 0; i < h.train_loss.size(); ++i) {
        std::cout << "  epoch " << (i + 1) << ": train " << h.train_loss[i] << ", val "
                  << h.val_mse[i] << "\n";
    }
    std::cout << "artifacts: " << dir << "\n";
    if (h.diverged) {
        std::cerr << "train: run diverged, stopping early\n";
        return 1;
    }
    return 0;
}

int run_eval(const CommonOpts& opts, const std::string& model_path) {
    RunConfig c = load_with_overrides(opts);
    UniCastModel model = load_model(model_path);
    if (model.spec.context_len != c.dataset.context_len)
        throw config_error("config: dataset.context_len " +
                           std::to_string(c.dataset.context_len) + " does not match the model's " +
                           std::to_string(model.spec.context_len));

    PreparedData data = build_dataset(c);
    DatasetDescription desc{c.dataset.description};
    std::string dir = make_run_dir(c.out_dir, "eval", opts.stamp.value_or(now_stamp()), c.seed);
    write_config_snapshot(c, dir + "/config.json");

    std::ofstream out(dir + "/eval.csv", std::ios::binary);
    if (!out) throw input_error("cannot write '" + dir + "/eval.csv'");
    out << "split,windows,mse\n";
    char line[128];
    bool any = false;
    const std::pair<const char*, const std::vector<WindowPair>*> splits[] = {
        {"val", &data.val}, {"test", &data.test}};
    for (const auto& [name, windows] : splits) {
        if (windows->empty()) continue;
        any = true;
        double mse = evaluate(model, *windows, desc);
        std::snprintf(line, sizeof(line), "%s,%zu,%.17g\n", name, windows->size(), mse);
        out << line;
        std::cout << name << " mse: " << mse << " over " << windows->size() << " windows\n";
    }
    if (!any) throw input_error("eval: no val or test windows in the dataset");
    std::cout << "artifacts: " << dir << "\n";
    return 0;
}

int run_ablate(const CommonOpts& opts, const std::string& axis_name,
               const std::string& component) {
    AblationAxis axis = ablation_axis_from_string(axis_name);
    if (!component.empty() && axis != AblationAxis::PromptLength)
        throw config_error("--component applies only to --axis length");

    RunConfig c = load_with_overrides(opts);
    AblationGrid grid;
    grid.axis = axis;
    grid.levels = default_levels(axis, component);
    grid.base_model = c.model;
    grid.base_train = c.train;
    grid.data = build_dataset(c);
    grid.description_text = c.dataset.description;
    grid.seed = c.seed;

    RunReport report = run_ablation(grid);
    std::string dir = make_run_dir(c.out_dir, "ablate_" + axis_name,
                                   opts.stamp.value_or(now_stamp()), c.seed);
    write_config_snapshot(c, dir + "/config.json");
    write_report_csv(report, dir + "/report.csv");
    write_report_json(report, dir + "/report.json");
    std::cout << format_report_text(report);

    // Numeric axes get the curve; categorical ones only the table.
    if (axis == AblationAxis::DataVolume || axis == AblationAxis::Epochs) {
        std::vector<double> xs, ys;
        for (const AblationRow& row : report.rows) {
            if (!row.error.empty()) continue;
            xs.push_back(std::stod(row.level));
            ys.push_back(row.val_mse);
        }
        if (!xs.empty()) {
            const char* x_label = axis == AblationAxis::DataVolume ? "train fraction" : "epoch";
            write_line_chart_svg(xs, ys, "val mse by " + std::string(x_label), x_label,
                                 "val mse", dir + "/val_mse.svg");
        }
    }

    int failed = 0;
    for (const AblationRow& row : report.rows) {
        if (!row.error.empty()) {
            ++failed;
            std::cerr << "level '" << row.level << "' failed: " << row.error << "\n";
        }
    }
    std::cout << "artifacts: " << dir << "\n";
    return failed == static_cast<int>(report.rows.size()) && failed > 0 ? 1 : 0;
}

int run_report(const CommonOpts& opts) {
    std::vector<EfficiencyRow> rows = preset_efficiency_table();
    std::cout << format_efficiency_text(rows);
    std::string root = resolve_out_root(opts, "runs");
    std::string dir =
        make_run_dir(root, "report_table6", opts.stamp.value_or(now_stamp()), opts.seed.value_or(0));
    write_efficiency_csv(rows, dir + "/table6.csv");
    std::cout << "artifacts: " << dir << "\n";
    return 0;
}

int run_render(const CommonOpts& opts) {
    RunConfig c = load_with_overrides(opts);
    SeriesCollection col = build_collection(c);
    std::string dir = make_run_dir(c.out_dir, "render", opts.stamp.value_or(now_stamp()), c.seed);
    for (size_t i = 0; i < col.series.size(); ++i) {
        RasterImage img = render_series(col.series[i], c.model.image_size, c.model.image_size,
                                        c.model.line_thickness);
        write_pgm(img, dir + "/" + col.name + "_" + std::to_string(i) + ".pgm");
    }
    std::cout << "rendered " << col.series.size() << " series to " << dir << "\n";
    return 0;
}

int run_synth(const SynthSpec& spec, const std::string& out_file) {
    SeriesCollection col = make_synthetic(spec);
    std::string path = out_file.empty() ? to_string(spec.kind) + ".csv" : out_file;
    if (path.find('/') != std::string::npos)
        std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    write_collection_csv(col, path);
    std::cout << "wrote " << col.series.size() << " series of length " << spec.length << " to "
              << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prompt-tuned multimodal time-series forecasting"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string model_path, axis_name, component, synth_kind = "sine_mix", synth_out;
    bool table6 = false;
    SynthSpec synth;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", opts.config_path, "run configuration file")->required();
        cmd->add_option("--seed", opts.seed, "override the config seed");
        cmd->add_option("--out", opts.out, "output root directory");
        cmd->add_option("--stamp", opts.stamp, "fixed timestamp for the artifact directory");
    };

    CLI::App* train_cmd = app.add_subcommand("train", "fit prompts on one dataset");
    add_common(train_cmd, true);

    CLI::App* eval_cmd = app.add_subcommand("eval", "score a saved model");
    add_common(eval_cmd, true);
    eval_cmd->add_option("--model", model_path, "model file from a train run")->required();

    CLI::App* ablate_cmd = app.add_subcommand("ablate", "sweep one protocol axis");
    add_common(ablate_cmd, true);
    ablate_cmd->add_option("--axis", axis_name, "modality|location|length|epochs|volume")
        ->required();
    ablate_cmd->add_option("--component", component, "fix the length sweep to vision|text|tsfm");

    CLI::App* report_cmd = app.add_subcommand("report", "print parameter-efficiency tables");
    add_common(report_cmd, false);
    report_cmd->add_flag("--table6", table6, "full-scale configuration table")->required();

    CLI::App* render_cmd = app.add_subcommand("render", "rasterize a dataset's series");
    add_common(render_cmd, true);

    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_cmd->add_option("--kind", synth_kind, "sine_mix|trend_season|random_walk");
    synth_cmd->add_option("--num-series", synth.num_series, "series count");
    synth_cmd->add_option("--length", synth.length, "points per series");
    synth_cmd->add_option("--noise", synth.noise_sigma, "noise scale");
    synth_cmd->add_option("--seed", synth.seed, "generator seed");
    synth_cmd->add_option("--out", synth_out, "output csv path (default {kind}.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(train_cmd)) return run_train(opts);
        if (app.got_subcommand(eval_cmd)) return run_eval(opts, model_path);
        if (app.got_subcommand(ablate_cmd)) return run_ablate(opts, axis_name, component);
        if (app.got_subcommand(report_cmd)) return run_report(opts);
        if (app.got_subcommand(render_cmd)) return run_render(opts);
        if (app.got_subcommand(synth_cmd)) {
            synth.kind = synth_kind_from_string(synth_kind);
            return run_synth(synth, synth_out);
        }
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
