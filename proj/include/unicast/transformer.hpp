#pragma once

#include <map>
#include <vector>

#include "unicast/tensor.hpp"

namespace unicast {

// Which layers of a stack receive fresh prompt rows. Layer indices are
// 1-based. TopHalf means the layers closest to the output.
enum class PromptVariant { First, Odd, TopHalf, All };

struct PromptSchedule {
    PromptVariant variant = PromptVariant::All;
    int num_layers = 1;
};

// Sorted 1-based layer indices selected by the schedule.
// First -> {1}; Odd -> {1,3,...}; TopHalf -> last ceil(L/2) layers; All -> {1..L}.
std::vector<int> resolve_schedule(const PromptSchedule& schedule);

std::string to_string(PromptVariant v);
PromptVariant prompt_variant_from_string(const std::string& s);

// One pre-norm transformer block. Every tensor here stays frozen
// (requires_grad = false) for the lifetime of a run; adaptation happens
// exclusively through prompts, interaction layers, and the head.
struct LayerWeights {
    int num_heads = 1; // must divide the model width
    Tensor w_q, b_q;
    Tensor w_k, b_k;
    Tensor w_v, b_v;
    Tensor w_o, b_o;
    Tensor w1, b1; // d -> 4d
    Tensor w2, b2; // 4d -> d
    Tensor ln1_gain, ln1_bias;
    Tensor ln2_gain, ln2_bias;
};

// Trainable per-layer prompt matrices, one l x d tensor per scheduled layer.
// prompt_length 0 means prompting is disabled for the stack.
struct PromptSet {
    std::map<int, Tensor> prompts;
    int prompt_length = 0;
    PromptSchedule schedule;
};

struct StackConfig {
    int num_layers = 1;
    int d_model = 1;
    int num_heads = 1;
    bool causal = false;
    int prompt_length = 0;
    PromptSchedule schedule;
};

// Strips the first carried_prompt_len rows (stale prompt positions from the
// previous prompted layer) and prepends the fresh prompt rows. An undefined
// prompt acts as a zero-length prompt: stale rows are stripped, nothing is
// prepended.
Tensor inject_prompts(const Tensor& seq, const Tensor& prompt, int carried_prompt_len);

// Pre-norm multi-head self-attention + residual, then pre-norm MLP + residual.
// With causal set, position i attends only to positions <= i.
Tensor layer_forward(const Tensor& x, const LayerWeights& w, bool causal);

// Runs the whole stack: scheduled layers strip-and-replace prompt rows before
// the block, other layers pass the sequence through untouched. The returned
// hidden states still include the most recent prompt rows.
Tensor stack_forward(const Tensor& tokens, const StackConfig& config,
                     const std::vector<LayerWeights>& weights, const PromptSet& prompts);

// Frozen random block weights: gaussian projections, zero biases, unit norms.
LayerWeights make_layer_weights(int d_model, int num_heads, Rng& rng, double sigma);

// Builds trainable prompt tensors for every scheduled layer.
PromptSet make_prompt_set(const StackConfig& config, Rng& rng, double sigma);

// Classic fixed sin/cos table, one row per position. Added once at token
// embedding; prompt rows never receive positional encoding.
Tensor sinusoidal_encoding(int seq_len, int d_model);

} // namespace unicast
