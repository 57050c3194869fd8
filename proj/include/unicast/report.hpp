#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unicast/data.hpp"
#include "unicast/model.hpp"
#include "unicast/train.hpp"

namespace unicast {

// One prompted transformer stack as the parameter-counting formula sees it.
struct PromptedComponent {
    bool present = false;
    int num_layers = 0;
    int width = 0;
    int prompt_length = 0;
};

// Architecture summary for trainable-parameter accounting. Interaction
// layers project a modality's width to the forecaster's width, so their
// cost follows from the component dims; the flags let a spec drop them.
struct ArchSpec {
    PromptedComponent vision;
    PromptedComponent text;
    PromptedComponent tsfm;
    bool interact_vision = false;
    bool interact_text = false;
};

// Trainable scalars implied by an ArchSpec:
//   per present modality: num_layers * prompt_length * width
//   per enabled interaction: width * tsfm.width + tsfm.width
//   forecaster prompts: tsfm layers * prompt_length * tsfm.width
// The output head is deliberately excluded; published counts do not carry
// it, and the head exists in every configuration alike.
int64_t count_trainable(const ArchSpec& spec);

// The same accounting written out as arithmetic, e.g.
// "12*10*768 + (768*1024 + 1024) + 8*4*1024 = 912384". Lets every stored
// count be re-derived by eye.
std::string count_derivation(const ArchSpec& spec);

// ArchSpec matching a constructed model's dims. Only faithful when every
// schedule is the every-layer variant, which is what the counting formula
// assumes; other schedules own fewer prompt tensors.
ArchSpec arch_from_model_spec(const ModelSpec& spec);

// Named full-scale backbones. Dims are data: they are the unique solution
// of the counting formula against the published trainable counts.
// vision/text name "" means the modality is absent.
ArchSpec preset_arch(const std::string& tsfm, const std::string& vision,
                     const std::string& text);

struct EfficiencyRow {
    std::string tsfm;
    std::string vision;  // "" when absent
    std::string text;    // "" when absent
    int64_t trainable = 0;
    int64_t total = 0;           // published whole-model parameter count
    int64_t backbone_total = 0;  // published forecaster-only parameter count
    double ratio_pct = 0.0;      // 100 * trainable / total
    double relative_pct = 0.0;   // 100 * trainable / backbone_total
    std::string derivation;
};

// Ratio columns for one configuration. Totals are inputs, not recomputed;
// zero or negative totals -> input_error.
EfficiencyRow efficiency_row(const std::string& tsfm, const std::string& vision,
                             const std::string& text, int64_t total, int64_t backbone_total);

// The full 13-row configuration table (8 timer rows, 5 chronos rows) with
// published totals attached.
std::vector<EfficiencyRow> preset_efficiency_table();

// "912384" -> "912,384"
std::string format_with_commas(int64_t v);

// Aligned human-readable table of the rows.
std::string format_efficiency_text(const std::vector<EfficiencyRow>& rows);

// Machine twin: one row per configuration, derivation included.
void write_efficiency_csv(const std::vector<EfficiencyRow>& rows, const std::string& path);

// Mean forecast MSE in standardized space. Empty set -> input_error;
// deterministic across calls.
double evaluate(const UniCastModel& model, const std::vector<WindowPair>& windows,
                const DatasetDescription& description);

enum class AblationAxis { Modality, PromptLocation, PromptLength, Epochs, DataVolume };

std::string to_string(AblationAxis axis);
AblationAxis ablation_axis_from_string(const std::string& s);

// Levels each axis runs when the grid does not name its own.
//   Modality:       none, vision, text, vision+text
//   PromptLocation: first, odd, top_half, all
//   PromptLength:   {4,10,16} per component, or 3 levels when one
//                   component is fixed
//   Epochs:         one run; rows come from the epoch history
//   DataVolume:     0.25, 0.5, 0.75, 1
std::vector<std::string> default_levels(AblationAxis axis, const std::string& component = "");

// One protocol sweep: every level trains its own model from the shared
// seed on the shared split.
struct AblationGrid {
    AblationAxis axis = AblationAxis::Modality;
    std::vector<std::string> levels;  // empty -> default_levels(axis)
    ModelSpec base_model;
    TrainConfig base_train;
    PreparedData data;
    std::string description_text;
    uint64_t seed = 0;
};

struct AblationRow {
    std::string level;
    double zs_val_mse = 0.0;   // untrained adapters, before any step
    double zs_test_mse = 0.0;
    double val_mse = 0.0;      // after training
    double test_mse = 0.0;
    int64_t trainable_params = 0;
    double seconds = 0.0;
    std::string error;  // empty on success
};

struct RunReport {
    AblationAxis axis = AblationAxis::Modality;
    uint64_t seed = 0;
    std::vector<AblationRow> rows;
};

// Runs the grid level by level. A level that throws is recorded in its
// row's error field and the sweep continues. The Epochs axis trains once
// and emits one row per epoch with the final test MSE on the last row.
RunReport run_ablation(const AblationGrid& grid);

// CSV of the deterministic columns only; wall-clock lives in the JSON so
// identical config + seed reruns produce byte-identical CSV files.
void write_report_csv(const RunReport& report, const std::string& path);
void write_report_json(const RunReport& report, const std::string& path);
std::string format_report_text(const RunReport& report);

// Minimal self-contained line chart, deterministic byte-for-byte for the
// same points.
void write_line_chart_svg(const std::vector<double>& xs, const std::vector<double>& ys,
                          const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::string& path);

// "{experiment}_{stamp}_{seed}"
std::string artifact_stem(const std::string& experiment, const std::string& stamp,
                          uint64_t seed);

}  // namespace unicast
