#pragma once

#include <string>

#include "unicast/data.hpp"
#include "unicast/model.hpp"
#include "unicast/synth.hpp"
#include "unicast/train.hpp"

namespace unicast {

// Where the windows come from. Either a file on disk (path + schema) or a
// generated collection (synthetic = true). The description is the free-text
// blurb the text branch reads with every window.
struct DatasetSection {
    std::string name = "synthetic";
    bool synthetic = true;
    std::string path;
    InputSchema schema = InputSchema::CsvWide;
    SynthKind kind = SynthKind::SineMix;
    int num_series = 10;
    int length = 400;  // leaves room for val/test windows at C = H = 32
    double noise_sigma = 0.1;

    int context_len = 32;
    int horizon = 32;
    StandardizationMode mode = StandardizationMode::PerWindow;
    SplitAxis axis = SplitAxis::TimeAxis;
    SubsampleRule subsample = SubsampleRule::None;
    int train_stride = 0;  // 0 = library default
    int eval_stride = 0;
    std::string description = "synthetic sine waves";
};

// One file describes one run. The single seed at the top is the root of
// every random stream in the run: synthesis, subsampling, splitting, model
// construction, and training all derive labeled children from it.
struct RunConfig {
    uint64_t seed = 0;
    std::string out_dir = "runs";
    DatasetSection dataset;
    ModelSpec model;
    TrainConfig train;
};

// Strict parse of the JSON config text. Missing keys take the defaults
// above; unknown keys are rejected at every level, naming the key and its
// section. The model section never carries context_len: the dataset owns
// it, and the loader copies it across. Seed and description propagate into
// the train section the same way.
RunConfig parse_run_config(const std::string& text);

// parse + file-existence checks (dataset.path when synthetic is false).
RunConfig load_run_config(const std::string& path);

// Field-level sanity: horizon must equal context_len (the model forecasts
// exactly one context length), strides nonnegative, dims positive.
void validate_run_config(const RunConfig& c);

// The full config with every default resolved, keys sorted, stable across
// processes. parse_run_config(run_config_snapshot(c)) reproduces c.
std::string run_config_snapshot(const RunConfig& c);
void write_config_snapshot(const RunConfig& c, const std::string& path);

// Materializes the dataset section: synthesize or load, then subsample,
// split, window, standardize. All randomness is label-split from c.seed.
PreparedData build_dataset(const RunConfig& c);

// The raw collection before windowing, for rendering and inspection.
SeriesCollection build_collection(const RunConfig& c);

}  // namespace unicast
