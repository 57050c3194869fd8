#include "unicast/transformer.hpp"

#include <cmath>
#include <set>

namespace unicast {

std::vector<int> resolve_schedule(const PromptSchedule& schedule) {
    const int L = schedule.num_layers;
    if (L < 1) throw config_error("resolve_schedule: num_layers must be >= 1");
    std::vector<int> out;
    switch (schedule.variant) {
        case PromptVariant::First:
            out.push_back(1);
            break;
        case PromptVariant::Odd:
            for (int k = 1; k <= L; k += 2) out.push_back(k);
            break;
        case PromptVariant::TopHalf: {
            const int count = (L + 1) / 2;
            for (int k = L - count + 1; k <= L; ++k) out.push_back(k);
            break;
        }
        case PromptVariant::All:
            for (int k = 1; k <= L; ++k) out.push_back(k);
            break;
        default:
            throw config_error("resolve_schedule: unknown variant");
    }
    return out;
}

std::string to_string(PromptVariant v) {
    switch (v) {
        case PromptVariant::First: return "first";
        case PromptVariant::Odd: return "odd";
        case PromptVariant::TopHalf: return "top_half";
        case PromptVariant::All: return "all";
    }
    throw config_error("to_string: unknown prompt variant");
}

PromptVariant prompt_variant_from_string(const std::string& s) {
    if (s == "first") return PromptVariant::First;
    if (s == "odd") return PromptVariant::Odd;
    if (s == "top_half") return PromptVariant::TopHalf;
    if (s == "all") return PromptVariant::All;
    throw config_error("prompt variant must be first|odd|top_half|all, got '" + s + "'");
}

Tensor inject_prompts(const Tensor& seq, const Tensor& prompt, int carried_prompt_len) {
    const int s = seq.rows();
    if (carried_prompt_len < 0 || carried_prompt_len > s) {
        throw contract_error("inject_prompts: carried length " + std::to_string(carried_prompt_len) +
                             " exceeds sequence of " + std::to_string(s) + " rows");
    }
    if (!prompt.defined()) {
        if (carried_prompt_len == 0) return seq;
        return slice_rows(seq, carried_prompt_len, s);
    }
    if (prompt.cols() != seq.cols()) {
        throw dimension_error("inject_prompts: prompt width " + std::to_string(prompt.cols()) +
                              " vs sequence width " + std::to_string(seq.cols()));
    }
    if (carried_prompt_len == s) return prompt;
    if (carried_prompt_len == 0) return concat_rows({prompt, seq});
    return concat_rows({prompt, slice_rows(seq, carried_prompt_len, s)});
}

Tensor layer_forward(const Tensor& x, const LayerWeights& w, bool causal) {
    const int d = w.w_q.rows();
    if (x.cols() != d) {
        throw dimension_error("layer_forward: input width " + std::to_string(x.cols()) +
                              " vs block width " + std::to_string(d));
    }
    const int heads = w.num_heads;
    if (heads < 1 || d % heads != 0) {
        throw config_error("layer_forward: " + std::to_string(heads) + " heads do not divide width " +
                           std::to_string(d));
    }
    const int dh = d / heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor n1 = layer_norm(x, w.ln1_gain, w.ln1_bias);
    Tensor q = add(matmul(n1, w.w_q), w.b_q);
    Tensor k = add(matmul(n1, w.w_k), w.b_k);
    Tensor v = add(matmul(n1, w.w_v), w.b_v);

    std::vector<Tensor> head_outs;
    head_outs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
        Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
        Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
        Tensor scores = scale(matmul(qh, transpose(kh)), att_scale);
        if (causal) scores = causal_mask_add(scores);
        head_outs.push_back(matmul(softmax_rows(scores), vh));
    }
    Tensor merged = heads == 1 ? head_outs[0] : concat_cols(head_outs);
    Tensor att_out = add(matmul(merged, w.w_o), w.b_o);
    Tensor x2 = add(x, att_out);

    Tensor n2 = layer_norm(x2, w.ln2_gain, w.ln2_bias);
    Tensor mlp = add(matmul(gelu(add(matmul(n2, w.w1), w.b1)), w.w2), w.b2);
    return add(x2, mlp);
}

Tensor stack_forward(const Tensor& tokens, const StackConfig& config,
                     const std::vector<LayerWeights>& weights, const PromptSet& prompts) {
    if (static_cast<int>(weights.size()) != config.num_layers) {
        throw contract_error("stack_forward: " + std::to_string(weights.size()) + " blocks for " +
                             std::to_string(config.num_layers) + " configured layers");
    }
    const std::vector<int> scheduled = resolve_schedule(config.schedule);
    const std::set<int> scheduled_set(scheduled.begin(), scheduled.end());

    Tensor x = tokens;
    int carried = 0;
    for (int layer = 1; layer <= config.num_layers; ++layer) {
        if (prompts.prompt_length > 0 && scheduled_set.count(layer)) {
            auto it = prompts.prompts.find(layer);
            if (it == prompts.prompts.end()) {
                throw config_error("stack_forward: no prompt tensor for scheduled layer " +
                                   std::to_string(layer));
            }
            x = inject_prompts(x, it->second, carried);
            carried = prompts.prompt_length;
        }
        x = layer_forward(x, weights[static_cast<size_t>(layer - 1)], config.causal);
        check_finite(x, "stack layer " + std::to_string(layer));
    }
    return x;
}

LayerWeights make_layer_weights(int d_model, int num_heads, Rng& rng, double sigma) {
    if (d_model < 1) throw config_error("make_layer_weights: width must be >= 1");
    if (num_heads < 1 || d_model % num_heads != 0) {
        throw config_error("make_layer_weights: " + std::to_string(num_heads) +
                           " heads do not divide width " + std::to_string(d_model));
    }
    const Init g = Init::gaussian(sigma);
    LayerWeights w;
    w.num_heads = num_heads;
    w.w_q = seeded_init({d_model, d_model}, g, rng);
    w.b_q = Tensor::zeros({d_model});
    w.w_k = seeded_init({d_model, d_model}, g, rng);
    w.b_k = Tensor::zeros({d_model});
    w.w_v = seeded_init({d_model, d_model}, g, rng);
    w.b_v = Tensor::zeros({d_model});
    w.w_o = seeded_init({d_model, d_model}, g, rng);
    w.b_o = Tensor::zeros({d_model});
    w.w1 = seeded_init({d_model, 4 * d_model}, g, rng);
    w.b1 = Tensor::zeros({4 * d_model});
    w.w2 = seeded_init({4 * d_model, d_model}, g, rng);
    w.b2 = Tensor::zeros({d_model});
    w.ln1_gain = Tensor::full({d_model}, 1.0);
    w.ln1_bias = Tensor::zeros({d_model});
    w.ln2_gain = Tensor::full({d_model}, 1.0);
    w.ln2_bias = Tensor::zeros({d_model});
    return w;
}

PromptSet make_prompt_set(const StackConfig& config, Rng& rng, double sigma) {
    if (config.prompt_length < 0) throw config_error("make_prompt_set: negative prompt length");
    PromptSet set;
    set.prompt_length = config.prompt_length;
    set.schedule = config.schedule;
    if (config.prompt_length == 0) return set;
    for (int layer : resolve_schedule(config.schedule)) {
        set.prompts[layer] = seeded_init({config.prompt_length, config.d_model},
                                         Init::gaussian(sigma), rng, /*requires_grad=*/true);
    }
    return set;
}

Tensor sinusoidal_encoding(int seq_len, int d_model) {
    if (seq_len < 1 || d_model < 1) {
        throw config_error("sinusoidal_encoding: bad dimensions " + std::to_string(seq_len) + "x" +
                           std::to_string(d_model));
    }
    std::vector<double> data(static_cast<size_t>(seq_len) * d_model, 0.0);
    for (int pos = 0; pos < seq_len; ++pos) {
        for (int pair = 0; 2 * pair < d_model; ++pair) {
            const double angle =
                pos * std::exp(-std::log(10000.0) * (2.0 * pair) / d_model);
            data[static_cast<size_t>(pos) * d_model + 2 * pair] = std::sin(angle);
            if (2 * pair + 1 < d_model) {
                data[static_cast<size_t>(pos) * d_model + 2 * pair + 1] = std::cos(angle);
            }
        }
    }
    return Tensor::from_data({seq_len, d_model}, std::move(data));
}

} // namespace unicast
