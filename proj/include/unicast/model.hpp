#pragma once

#include <optional>

#include "unicast/encoders.hpp"

namespace unicast {

// Frozen linear map from raw context patches into the TSFM width.
struct PatchEmbedder {
    int patch_len = 1;
    Tensor w; // patch_len x d_ts
    Tensor b; // d_ts
};

// Trainable affine bridge from an encoder's width into the TSFM width.
// Parameter count per layer: d_src * d_ts + d_ts.
struct InteractionLayer {
    Tensor w; // d_src x d_ts
    Tensor b; // d_ts
};

// Trainable readout: one patch of forecast values per time-series position.
struct ForecastHead {
    Tensor w; // d_ts x patch_len
    Tensor b; // patch_len
};

// Full architecture description. Defaults are the desk-scale stand-in;
// prompt lengths 10/4/4 are the published operating point.
struct ModelSpec {
    bool use_vision = true;
    bool use_text = true;

    int image_size = 64; // square, divisible by patch_size
    int patch_size = 8;
    int line_thickness = 1;
    int vision_layers = 2;
    int d_v = 32;
    int vision_heads = 4;
    int vision_prompt_len = 10;
    PromptVariant vision_schedule = PromptVariant::All;

    int max_text_len = 32;
    int text_layers = 2;
    int d_t = 48;
    int text_heads = 4;
    int text_prompt_len = 4;
    PromptVariant text_schedule = PromptVariant::All;

    int context_len = 32;
    int patch_len = 0; // 0 = auto (largest divisor of context_len <= max(1, C/4))
    int ts_layers = 2;
    int d_ts = 64;
    int ts_heads = 4;
    int ts_prompt_len = 4;
    PromptVariant ts_schedule = PromptVariant::All;
    bool causal_ts = true; // decoder-style stack; false = bidirectional

    // Adaptation-layer inits: small so the frozen backbone's behavior
    // dominates at step 0. Biases start at zero.
    double prompt_sigma = 0.02;
    double interaction_sigma = 0.02;
};

int auto_patch_len(int context_len);

struct UniCastModel {
    ModelSpec spec; // patch_len resolved
    uint64_t seed = 0;

    std::optional<VisionEncoder> vision;
    std::optional<InteractionLayer> interact_v;
    std::optional<TextEncoder> text;
    std::optional<InteractionLayer> interact_t;

    PatchEmbedder patch;
    StackConfig ts_stack;
    std::vector<LayerWeights> ts_weights;
    PromptSet ts_prompts;
    ForecastHead head;
};

// Deterministic construction: every weight family draws from its own
// label-keyed stream, so the time-series stack is bitwise identical whether
// or not the vision/text paths are built.
UniCastModel build_model(const ModelSpec& spec, uint64_t seed);

// Non-overlapping context patches, linearly embedded, positions added.
Tensor patch_embed(const std::vector<double>& x_ts, const PatchEmbedder& embedder);

Tensor project_modality(const Tensor& o, const InteractionLayer& layer);

struct FusedSequence {
    Tensor seq;
    int vision_rows = 0;
    int text_rows = 0;
    int ts_rows = 0;
};

// Row concatenation in fixed order vision, text, time series. Undefined
// tensors contribute zero rows; the time-series block is mandatory.
FusedSequence fuse(const Tensor& o_v, const Tensor& o_t, const Tensor& o_ts);

// Per-window inputs with the rasterization and tokenization already done,
// so epochs do not repeat that work.
struct PreparedInput {
    Tensor patch_rows;           // defined iff the model has a vision path
    std::vector<int> token_ids;  // nonempty iff the model has a text path
    std::vector<double> context; // standardized, length context_len
};

PreparedInput prepare_input(const std::vector<double>& x_ts, const DatasetDescription& description,
                            const UniCastModel& model);

// Differentiable end-to-end forward. Returns the length-C forecast in
// standardized space. Non-finite values abort with the failing stage named.
Tensor forecast_prepared(const PreparedInput& input, const UniCastModel& model);

// Inference entry point: prepare + forward with no graph construction.
std::vector<double> unicast_forward(const std::vector<double>& x_ts,
                                    const DatasetDescription& description,
                                    const UniCastModel& model);

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

// Every parameter tensor in a stable order, frozen and trainable alike.
std::vector<NamedTensor> all_parameters(const UniCastModel& m);

// The adaptation set: prompts, interaction layers, head. Order is stable
// across calls, which optimizer state relies on.
std::vector<Tensor> trainable_parameters(const UniCastModel& m);

int64_t trainable_scalar_count(const UniCastModel& m);

// JSON-of-arrays snapshot: ModelSpec + seed + every tensor. Loading rebuilds
// the architecture from the stored ModelSpec and then restores tensor
// contents exactly.
void save_model(const UniCastModel& m, const std::string& path);
UniCastModel load_model(const std::string& path);

} // namespace unicast
