#include "unicast/model.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace unicast {

namespace {

using nlohmann::json;

void validate_spec(const ModelSpec& s) {
    if (s.context_len < 2) throw config_error("model: context length must be >= 2");
    if (s.ts_layers < 0 || s.vision_layers < 0 || s.text_layers < 0) {
        throw config_error("model: negative layer count");
    }
    if (s.vision_prompt_len < 0 || s.text_prompt_len < 0 || s.ts_prompt_len < 0) {
        throw config_error("model: negative prompt length");
    }
    if (s.use_vision) {
        if (s.image_size < 16) throw config_error("model: image size must be >= 16");
        if (s.image_size % s.patch_size != 0) {
            throw config_error("model: image size " + std::to_string(s.image_size) +
                               " not divisible by patch size " + std::to_string(s.patch_size));
        }
    }
    if (s.use_text && s.max_text_len < 1) {
        throw config_error("model: max_text_len must be >= 1");
    }
}

// Variance-preserving width for gaussian projections.
double fan_in_sigma(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

} // namespace

int auto_patch_len(int context_len) {
    if (context_len < 1) throw config_error("auto_patch_len: context length must be >= 1");
    const int cap = std::max(1, context_len / 4);
    for (int pl = cap; pl >= 1; --pl) {
        if (context_len % pl == 0) return pl;
    }
    return 1;
}

UniCastModel build_model(const ModelSpec& spec, uint64_t seed) {
    validate_spec(spec);
    UniCastModel m;
    m.spec = spec;
    m.seed = seed;
    if (m.spec.patch_len == 0) m.spec.patch_len = auto_patch_len(spec.context_len);
    if (spec.context_len % m.spec.patch_len != 0) {
        throw config_error("model: context length " + std::to_string(spec.context_len) +
                           " not divisible by patch length " + std::to_string(m.spec.patch_len));
    }

    const Rng root(seed);

    if (spec.use_vision) {
        VisionEncoder v;
        v.patch_size = spec.patch_size;
        const int pp = spec.patch_size * spec.patch_size;
        Rng pe = root.split("vision_patch_embed");
        v.patch_w = seeded_init({pp, spec.d_v}, Init::gaussian(fan_in_sigma(pp)), pe);
        v.patch_b = Tensor::zeros({spec.d_v});
        v.stack.num_layers = spec.vision_layers;
        v.stack.d_model = spec.d_v;
        v.stack.num_heads = spec.vision_heads;
        v.stack.causal = false;
        v.stack.prompt_length = spec.vision_prompt_len;
        v.stack.schedule = {spec.vision_schedule, spec.vision_layers};
        Rng bw = root.split("vision_blocks");
        for (int i = 0; i < spec.vision_layers; ++i) {
            v.weights.push_back(
                make_layer_weights(spec.d_v, spec.vision_heads, bw, fan_in_sigma(spec.d_v)));
        }
        Rng pr = root.split("vision_prompts");
        v.prompts = make_prompt_set(v.stack, pr, spec.prompt_sigma);
        m.vision = std::move(v);

        Rng ir = root.split("interaction_vision");
        InteractionLayer iv;
        iv.w = seeded_init({spec.d_v, spec.d_ts}, Init::gaussian(spec.interaction_sigma), ir,
                           /*requires_grad=*/true);
        iv.b = Tensor::zeros({spec.d_ts}, /*requires_grad=*/true);
        m.interact_v = std::move(iv);
    }

    if (spec.use_text) {
        TextEncoder t;
        t.max_text_len = spec.max_text_len;
        Rng te = root.split("text_embed");
        t.token_embed = seeded_init({TextEncoder::kVocabSize, spec.d_t}, Init::gaussian(1.0), te);
        t.stack.num_layers = spec.text_layers;
        t.stack.d_model = spec.d_t;
        t.stack.num_heads = spec.text_heads;
        t.stack.causal = false;
        t.stack.prompt_length = spec.text_prompt_len;
        t.stack.schedule = {spec.text_schedule, std::max(1, spec.text_layers)};
        Rng bw = root.split("text_blocks");
        for (int i = 0; i < spec.text_layers; ++i) {
            t.weights.push_back(
                make_layer_weights(spec.d_t, spec.text_heads, bw, fan_in_sigma(spec.d_t)));
        }
        Rng pr = root.split("text_prompts");
        t.prompts = spec.text_layers == 0
                        ? PromptSet{}
                        : make_prompt_set(t.stack, pr, spec.prompt_sigma);
        m.text = std::move(t);

        Rng ir = root.split("interaction_text");
        InteractionLayer it;
        it.w = seeded_init({spec.d_t, spec.d_ts}, Init::gaussian(spec.interaction_sigma), ir,
                           /*requires_grad=*/true);
        it.b = Tensor::zeros({spec.d_ts}, /*requires_grad=*/true);
        m.interact_t = std::move(it);
    }

    m.patch.patch_len = m.spec.patch_len;
    Rng pe = root.split("ts_patch_embed");
    m.patch.w = seeded_init({m.spec.patch_len, spec.d_ts},
                            Init::gaussian(fan_in_sigma(m.spec.patch_len)), pe);
    m.patch.b = Tensor::zeros({spec.d_ts});

    m.ts_stack.num_layers = spec.ts_layers;
    m.ts_stack.d_model = spec.d_ts;
    m.ts_stack.num_heads = spec.ts_heads;
    m.ts_stack.causal = spec.causal_ts;
    m.ts_stack.prompt_length = spec.ts_prompt_len;
    m.ts_stack.schedule = {spec.ts_schedule, std::max(1, spec.ts_layers)};
    Rng bw = root.split("ts_blocks");
    for (int i = 0; i < spec.ts_layers; ++i) {
        m.ts_weights.push_back(
            make_layer_weights(spec.d_ts, spec.ts_heads, bw, fan_in_sigma(spec.d_ts)));
    }
    Rng pr = root.split("ts_prompts");
    m.ts_prompts =
        spec.ts_layers == 0 ? PromptSet{} : make_prompt_set(m.ts_stack, pr, spec.prompt_sigma);

    Rng hr = root.split("head");
    m.head.w = seeded_init({spec.d_ts, m.spec.patch_len}, Init::gaussian(fan_in_sigma(spec.d_ts)),
                           hr, /*requires_grad=*/true);
    m.head.b = Tensor::zeros({m.spec.patch_len}, /*requires_grad=*/true);
    return m;
}

Tensor patch_embed(const std::vector<double>& x_ts, const PatchEmbedder& embedder) {
    const int pl = embedder.patch_len;
    const int C = static_cast<int>(x_ts.size());
    if (pl < 1 || C % pl != 0) {
        throw dimension_error("patch_embed: context of " + std::to_string(C) +
                              " steps not divisible by patch length " + std::to_string(pl));
    }
    const int np = C / pl;
    Tensor rows = Tensor::from_data({np, pl}, x_ts);
    Tensor embedded = add(matmul(rows, embedder.w), embedder.b);
    return add(embedded, sinusoidal_encoding(np, embedded.cols()));
}

Tensor project_modality(const Tensor& o, const InteractionLayer& layer) {
    if (o.cols() != layer.w.rows()) {
        throw dimension_error("project_modality: input width " + std::to_string(o.cols()) +
                              " vs interaction source width " + std::to_string(layer.w.rows()));
    }
    return add(matmul(o, layer.w), layer.b);
}

FusedSequence fuse(const Tensor& o_v, const Tensor& o_t, const Tensor& o_ts) {
    if (!o_ts.defined()) throw contract_error("fuse: time-series block is mandatory");
    FusedSequence out;
    out.ts_rows = o_ts.rows();
    std::vector<Tensor> parts;
    if (o_v.defined()) {
        if (o_v.cols() != o_ts.cols()) {
            throw dimension_error("fuse: vision width " + std::to_string(o_v.cols()) +
                                  " vs time-series width " + std::to_string(o_ts.cols()));
        }
        out.vision_rows = o_v.rows();
        parts.push_back(o_v);
    }
    if (o_t.defined()) {
        if (o_t.cols() != o_ts.cols()) {
            throw dimension_error("fuse: text width " + std::to_string(o_t.cols()) +
                                  " vs time-series width " + std::to_string(o_ts.cols()));
        }
        out.text_rows = o_t.rows();
        parts.push_back(o_t);
    }
    parts.push_back(o_ts);
    out.seq = parts.size() == 1 ? o_ts : concat_rows(parts);
    return out;
}

PreparedInput prepare_input(const std::vector<double>& x_ts, const DatasetDescription& description,
                            const UniCastModel& model) {
    if (static_cast<int>(x_ts.size()) != model.spec.context_len) {
        throw input_error("prepare_input: context of " + std::to_string(x_ts.size()) +
                          " steps, model expects " + std::to_string(model.spec.context_len));
    }
    PreparedInput in;
    in.context = x_ts;
    if (model.vision) {
        RasterImage img = render_series(x_ts, model.spec.image_size, model.spec.image_size,
                                        model.spec.line_thickness);
        in.patch_rows = patchify_image(img, model.vision->patch_size);
    }
    if (model.text) {
        if (description.text.empty()) throw input_error("prepare_input: empty dataset description");
        in.token_ids = tokenize(description.text, model.text->max_text_len);
    }
    return in;
}

namespace {

// Rethrows numeric faults with the pipeline stage prepended, so a NaN names
// both the stage and the layer that produced it.
template <typename Fn>
Tensor staged(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const numeric_error& e) {
        throw numeric_error(std::string(stage) + ": " + e.what());
    }
}

} // namespace

Tensor forecast_prepared(const PreparedInput& input, const UniCastModel& model) {
    if (model.vision.has_value() != model.interact_v.has_value() ||
        model.text.has_value() != model.interact_t.has_value()) {
        throw contract_error("forecast: encoder and interaction layer presence must match");
    }

    Tensor o_v, o_t;
    if (model.vision) {
        if (!input.patch_rows.defined()) {
            throw contract_error("forecast: input prepared without vision patches");
        }
        Tensor enc = staged("vision encoder", [&] {
            return vision_forward_patches(input.patch_rows, *model.vision);
        });
        o_v = staged("vision interaction", [&] { return project_modality(enc, *model.interact_v); });
    }
    if (model.text) {
        if (input.token_ids.empty()) {
            throw contract_error("forecast: input prepared without token ids");
        }
        Tensor enc = staged("text encoder", [&] { return text_forward(input.token_ids, *model.text); });
        o_t = staged("text interaction", [&] { return project_modality(enc, *model.interact_t); });
    }

    Tensor o_ts = staged("patch embed", [&] { return patch_embed(input.context, model.patch); });
    FusedSequence fused = fuse(o_v, o_t, o_ts);

    Tensor hidden = fused.seq;
    if (model.spec.ts_layers > 0) {
        hidden = staged("tsfm stack", [&] {
            return stack_forward(fused.seq, model.ts_stack, model.ts_weights, model.ts_prompts);
        });
    }

    const int np = fused.ts_rows;
    Tensor ts_positions = slice_rows(hidden, hidden.rows() - np, hidden.rows());
    Tensor patches_out = staged("forecast head", [&] {
        Tensor y = add(matmul(ts_positions, model.head.w), model.head.b);
        check_finite(y, "head output");
        return y;
    });
    return reshape(patches_out, {np * model.patch.patch_len});
}

std::vector<double> unicast_forward(const std::vector<double>& x_ts,
                                    const DatasetDescription& description,
                                    const UniCastModel& model) {
    NoGradGuard ng;
    return forecast_prepared(prepare_input(x_ts, description, model), model).values();
}

namespace {

void push_block(std::vector<NamedTensor>& out, const std::string& prefix, const LayerWeights& w) {
    out.push_back({prefix + ".w_q", w.w_q});
    out.push_back({prefix + ".b_q", w.b_q});
    out.push_back({prefix + ".w_k", w.w_k});
    out.push_back({prefix + ".b_k", w.b_k});
    out.push_back({prefix + ".w_v", w.w_v});
    out.push_back({prefix + ".b_v", w.b_v});
    out.push_back({prefix + ".w_o", w.w_o});
    out.push_back({prefix + ".b_o", w.b_o});
    out.push_back({prefix + ".w1", w.w1});
    out.push_back({prefix + ".b1", w.b1});
    out.push_back({prefix + ".w2", w.w2});
    out.push_back({prefix + ".b2", w.b2});
    out.push_back({prefix + ".ln1_gain", w.ln1_gain});
    out.push_back({prefix + ".ln1_bias", w.ln1_bias});
    out.push_back({prefix + ".ln2_gain", w.ln2_gain});
    out.push_back({prefix + ".ln2_bias", w.ln2_bias});
}

void push_prompts(std::vector<NamedTensor>& out, const std::string& prefix, const PromptSet& p) {
    for (const auto& [layer, tensor] : p.prompts) {
        out.push_back({prefix + ".prompt." + std::to_string(layer), tensor});
    }
}

} // namespace

std::vector<NamedTensor> all_parameters(const UniCastModel& m) {
    std::vector<NamedTensor> out;
    if (m.vision) {
        out.push_back({"vision.patch_w", m.vision->patch_w});
        out.push_back({"vision.patch_b", m.vision->patch_b});
        for (size_t i = 0; i < m.vision->weights.size(); ++i) {
            push_block(out, "vision.block" + std::to_string(i + 1), m.vision->weights[i]);
        }
        push_prompts(out, "vision", m.vision->prompts);
    }
    if (m.text) {
        out.push_back({"text.token_embed", m.text->token_embed});
        for (size_t i = 0; i < m.text->weights.size(); ++i) {
            push_block(out, "text.block" + std::to_string(i + 1), m.text->weights[i]);
        }
        push_prompts(out, "text", m.text->prompts);
    }
    if (m.interact_v) {
        out.push_back({"interaction_vision.w", m.interact_v->w});
        out.push_back({"interaction_vision.b", m.interact_v->b});
    }
    if (m.interact_t) {
        out.push_back({"interaction_text.w", m.interact_t->w});
        out.push_back({"interaction_text.b", m.interact_t->b});
    }
    out.push_back({"ts.patch_w", m.patch.w});
    out.push_back({"ts.patch_b", m.patch.b});
    for (size_t i = 0; i < m.ts_weights.size(); ++i) {
        push_block(out, "ts.block" + std::to_string(i + 1), m.ts_weights[i]);
    }
    push_prompts(out, "ts", m.ts_prompts);
    out.push_back({"head.w", m.head.w});
    out.push_back({"head.b", m.head.b});
    return out;
}

std::vector<Tensor> trainable_parameters(const UniCastModel& m) {
    std::vector<Tensor> out;
    for (const NamedTensor& nt : all_parameters(m)) {
        if (nt.tensor.requires_grad()) out.push_back(nt.tensor);
    }
    return out;
}

int64_t trainable_scalar_count(const UniCastModel& m) {
    int64_t n = 0;
    for (const Tensor& t : trainable_parameters(m)) n += t.size();
    return n;
}

namespace {

json spec_to_json(const ModelSpec& s) {
    return json{{"use_vision", s.use_vision},
                {"use_text", s.use_text},
                {"image_size", s.image_size},
                {"patch_size", s.patch_size},
                {"line_thickness", s.line_thickness},
                {"vision_layers", s.vision_layers},
                {"d_v", s.d_v},
                {"vision_heads", s.vision_heads},
                {"vision_prompt_len", s.vision_prompt_len},
                {"vision_schedule", to_string(s.vision_schedule)},
                {"max_text_len", s.max_text_len},
                {"text_layers", s.text_layers},
                {"d_t", s.d_t},
                {"text_heads", s.text_heads},
                {"text_prompt_len", s.text_prompt_len},
                {"text_schedule", to_string(s.text_schedule)},
                {"context_len", s.context_len},
                {"patch_len", s.patch_len},
                {"ts_layers", s.ts_layers},
                {"d_ts", s.d_ts},
                {"ts_heads", s.ts_heads},
                {"ts_prompt_len", s.ts_prompt_len},
                {"ts_schedule", to_string(s.ts_schedule)},
                {"causal_ts", s.causal_ts},
                {"prompt_sigma", s.prompt_sigma},
                {"interaction_sigma", s.interaction_sigma}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    s.use_vision = j.at("use_vision").get<bool>();
    s.use_text = j.at("use_text").get<bool>();
    s.image_size = j.at("image_size").get<int>();
    s.patch_size = j.at("patch_size").get<int>();
    s.line_thickness = j.at("line_thickness").get<int>();
    s.vision_layers = j.at("vision_layers").get<int>();
    s.d_v = j.at("d_v").get<int>();
    s.vision_heads = j.at("vision_heads").get<int>();
    s.vision_prompt_len = j.at("vision_prompt_len").get<int>();
    s.vision_schedule = prompt_variant_from_string(j.at("vision_schedule").get<std::string>());
    s.max_text_len = j.at("max_text_len").get<int>();
    s.text_layers = j.at("text_layers").get<int>();
    s.d_t = j.at("d_t").get<int>();
    s.text_heads = j.at("text_heads").get<int>();
    s.text_prompt_len = j.at("text_prompt_len").get<int>();
    s.text_schedule = prompt_variant_from_string(j.at("text_schedule").get<std::string>());
    s.context_len = j.at("context_len").get<int>();
    s.patch_len = j.at("patch_len").get<int>();
    s.ts_layers = j.at("ts_layers").get<int>();
    s.d_ts = j.at("d_ts").get<int>();
    s.ts_heads = j.at("ts_heads").get<int>();
    s.ts_prompt_len = j.at("ts_prompt_len").get<int>();
    s.ts_schedule = prompt_variant_from_string(j.at("ts_schedule").get<std::string>());
    s.causal_ts = j.at("causal_ts").get<bool>();
    s.prompt_sigma = j.at("prompt_sigma").get<double>();
    s.interaction_sigma = j.at("interaction_sigma").get<double>();
    return s;
}

} // namespace

void save_model(const UniCastModel& m, const std::string& path) {
    json tensors = json::object();
    for (const NamedTensor& nt : all_parameters(m)) {
        tensors[nt.name] = json{{"shape", nt.tensor.shape()}, {"data", nt.tensor.values()}};
    }
    json doc{{"schema_version", 1},
             {"kind", "unicast_model"},
             {"seed", m.seed},
             {"spec", spec_to_json(m.spec)},
             {"tensors", std::move(tensors)}};
    std::ofstream out(path);
    if (!out) throw input_error("save_model: cannot open " + path);
    out << doc.dump(2) << "\n";
    if (!out) throw input_error("save_model: write failed for " + path);
}

UniCastModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("load_model: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw input_error("load_model: " + path + " is not valid JSON: " + e.what());
    }
    if (doc.value("kind", "") != "unicast_model") {
        throw input_error("load_model: " + path + " is not a model snapshot");
    }
    if (doc.value("schema_version", 0) != 1) {
        throw input_error("load_model: unsupported schema_version in " + path);
    }
    UniCastModel m = build_model(spec_from_json(doc.at("spec")), doc.at("seed").get<uint64_t>());
    const json& tensors = doc.at("tensors");
    for (NamedTensor& nt : all_parameters(m)) {
        auto it = tensors.find(nt.name);
        if (it == tensors.end()) {
            throw input_error("load_model: snapshot is missing tensor " + nt.name);
        }
        const auto shape = it->at("shape").get<Shape>();
        if (shape != nt.tensor.shape()) {
            throw input_error("load_model: tensor " + nt.name + " has shape " + shape_str(shape) +
                              ", expected " + shape_str(nt.tensor.shape()));
        }
        auto data = it->at("data").get<std::vector<double>>();
        if (static_cast<int64_t>(data.size()) != nt.tensor.size()) {
            throw input_error("load_model: tensor " + nt.name + " carries " +
                              std::to_string(data.size()) + " values for shape " +
                              shape_str(nt.tensor.shape()));
        }
        nt.tensor.mutable_data() = std::move(data);
    }
    return m;
}

} // namespace unicast
