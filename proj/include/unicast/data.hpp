#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "unicast/rng.hpp"

namespace unicast {

// How a window is normalized before it reaches the model.
//   PerWindow:   context mean/std of each window, applied to context and target.
//   WholeSeries: mean/std of the full raw series the window came from.
enum class StandardizationMode { PerWindow, WholeSeries };

// Where the train/val/test boundary runs.
//   TimeAxis:   every series is cut at 60% / 80% of its length.
//   SeriesAxis: whole series are shuffled and dealt out 60:20:20.
enum class SplitAxis { TimeAxis, SeriesAxis };

// Dataset-specific reduction applied before splitting.
enum class SubsampleRule { None, TruncateLong, SampleSeries };

std::string to_string(StandardizationMode mode);
std::string to_string(SplitAxis axis);
std::string to_string(SubsampleRule rule);
StandardizationMode standardization_mode_from_string(const std::string& s);
SplitAxis split_axis_from_string(const std::string& s);
SubsampleRule subsample_rule_from_string(const std::string& s);

// A named bundle of raw series plus the preprocessing knobs that apply to it.
// source_ids[i] is the index of series i in the collection as originally
// loaded; subsampling and splitting preserve it so per-series statistics can
// be looked up after the collection has been rearranged.
struct SeriesCollection {
    std::string name;
    std::vector<std::vector<double>> series;
    std::vector<int> source_ids;

    int context_len = 0;
    int horizon = 0;
    StandardizationMode mode = StandardizationMode::PerWindow;
    SplitAxis axis = SplitAxis::TimeAxis;
    SubsampleRule subsample = SubsampleRule::None;
};

enum class InputSchema { CsvWide, CsvLong, Jsonl };

std::string to_string(InputSchema schema);
InputSchema input_schema_from_string(const std::string& s);

// Reads a collection from disk. CsvWide: one series per row. CsvLong:
// "id,value" rows, grouped by id in first-appearance order. Jsonl: one
// {"id":..., "values":[...]} object per line. The same data expressed in any
// schema loads to identical series. Non-finite values, malformed rows, empty
// files, and series shorter than two points are all input_error, each naming
// the offending line or series.
SeriesCollection load_collection(const std::string& path, InputSchema schema);

// Fixed preprocessing configuration for the benchmark datasets.
struct DatasetPreset {
    int context_len = 0;
    StandardizationMode mode = StandardizationMode::PerWindow;
    SplitAxis axis = SplitAxis::TimeAxis;
    SubsampleRule subsample = SubsampleRule::None;
};

// Known names: covid, nn5, car_parts, au_elec, cif2016, dominick, hospital,
// tourism. Returns nullopt for anything else.
std::optional<DatasetPreset> dataset_preset(const std::string& name);

// Copies the preset named by c.name onto c (horizon = context_len).
// Unknown name -> config_error.
void apply_preset(SeriesCollection& c);

// Applies c.subsample. TruncateLong keeps the first 15000 points of every
// series; SampleSeries keeps 100 whole series drawn without replacement
// (fewer than 100 present -> config_error, the rule does not fit the data).
// None returns the collection unchanged. Randomness comes from a labeled
// child stream, so the caller's generator is not advanced.
SeriesCollection apply_subsample(const SeriesCollection& c, const Rng& rng);

struct SplitResult {
    SeriesCollection train, val, test;
};

// Splits along c.axis. TimeAxis requires every series length >= 5 and cuts
// at floor(0.6 n) / floor(0.8 n); SeriesAxis requires at least 5 series,
// shuffles them seeded, and partitions the order 60:20:20.
SplitResult split(const SeriesCollection& c, const Rng& rng);

// One context/target pair cut from a series, still in raw units.
struct RawWindow {
    std::vector<double> context;
    std::vector<double> target;
    int source_id = 0;
    int offset = 0;
};

// Slides a (context_len + horizon) window over one segment at the given
// stride. A segment shorter than one full window yields an empty list.
std::vector<RawWindow> make_windows(const std::vector<double>& segment, int context_len,
                                    int horizon, int stride, int source_id = 0);

// Population mean and standard deviation.
struct SeriesStats {
    double mean = 0.0;
    double std = 0.0;
};

SeriesStats compute_stats(const std::vector<double>& xs);

// A standardized window ready for the model, with the inverse transform.
struct WindowPair {
    std::vector<double> context;
    std::vector<double> target;
    double mean = 0.0;
    double std = 1.0;
    int source_id = 0;
    int offset = 0;
};

// Standardizes one raw window. PerWindow uses the context's own statistics
// and returns nullopt when the context is (near-)constant, std <= 1e-8;
// callers count those skips. WholeSeries applies series_stats and requires
// series_stats.std > 1e-8 (input_error otherwise: the series is degenerate).
std::optional<WindowPair> standardize(const RawWindow& w, StandardizationMode mode,
                                      const SeriesStats& series_stats);

// Maps a standardized forecast back to raw units.
std::vector<double> destandardize(const std::vector<double>& values, const WindowPair& w);

// Everything the trainer consumes: standardized windows per split plus the
// count of near-constant windows dropped from each.
struct PreparedData {
    std::vector<WindowPair> train, val, test;
    std::array<int, 3> skipped = {0, 0, 0};
};

// Full pipeline: subsample, per-series statistics on the raw (pre-split)
// series, split along c.axis, window each segment, standardize by c.mode.
// Train windows use train_stride; val and test use eval_stride. Passing
// stride 0 selects the defaults (1 for train, horizon for eval). Window
// offsets are relative to their split segment.
PreparedData prepare_dataset(const SeriesCollection& c, const Rng& rng, int train_stride = 0,
                             int eval_stride = 0);

}  // namespace unicast
