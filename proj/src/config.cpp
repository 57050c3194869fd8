#include "unicast/config.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

#include "unicast/errors.hpp"

namespace unicast {

namespace {

using nlohmann::json;

std::string field_path(const std::string& section, const char* key) {
    return section.empty() ? std::string(key) : section + "." + key;
}

[[noreturn]] void bad_field(const std::string& field, const std::string& msg) {
    throw config_error("config: " + field + ": " + msg);
}

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw config_error("config: " + section + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) throw config_error("config: unknown key '" + it.key() + "' in " + section);
    }
}

int get_int(const json& j, const std::string& section, const char* key, int dflt) {
    const json* v = find(j, key);
    if (!v) return dflt;
    if (!v->is_number_integer() && !v->is_number_unsigned())
        bad_field(field_path(section, key), "expected an integer");
    return v->get<int>();
}

uint64_t get_u64(const json& j, const std::string& section, const char* key, uint64_t dflt) {
    const json* v = find(j, key);
    if (!v) return dflt;
    if (!v->is_number_unsigned()) bad_field(field_path(section, key), "expected a nonnegative integer");
    return v->get<uint64_t>();
}

double get_double(const json& j, const std::string& section, const char* key, double dflt) {
    const json* v = find(j, key);
    if (!v) return dflt;
    if (!v->is_number()) bad_field(field_path(section, key), "expected a number");
    return v->get<double>();
}

bool get_bool(const json& j, const std::string& section, const char* key, bool dflt) {
    const json* v = find(j, key);
    if (!v) return dflt;
    if (!v->is_boolean()) bad_field(field_path(section, key), "expected true or false");
    return v->get<bool>();
}

std::string get_string(const json& j, const std::string& section, const char* key,
                       const std::string& dflt) {
    const json* v = find(j, key);
    if (!v) return dflt;
    if (!v->is_string()) bad_field(field_path(section, key), "expected a string");
    return v->get<std::string>();
}

// Re-throws enum parse failures with the config field attached.
template <typename Parse>
auto get_enum(const json& j, const std::string& section, const char* key, Parse parse,
              decltype(parse(std::string())) dflt) {
    const json* v = find(j, key);
    if (!v) return dflt;
    if (!v->is_string()) bad_field(field_path(section, key), "expected a string");
    try {
        return parse(v->get<std::string>());
    } catch (const config_error& e) {
        bad_field(field_path(section, key), e.what());
    }
}

void parse_dataset(const json& j, DatasetSection& d) {
    check_keys(j, "the dataset section",
               {"name", "synthetic", "path", "schema", "kind", "num_series", "length",
                "noise_sigma", "context_len", "horizon", "mode", "axis", "subsample",
                "train_stride", "eval_stride", "description"});
    d.name = get_string(j, "dataset", "name", d.name);
    d.synthetic = get_bool(j, "dataset", "synthetic", d.synthetic);
    d.path = get_string(j, "dataset", "path", d.path);
    d.schema = get_enum(j, "dataset", "schema", input_schema_from_string, d.schema);
    d.kind = get_enum(j, "dataset", "kind", synth_kind_from_string, d.kind);
    d.num_series = get_int(j, "dataset", "num_series", d.num_series);
    d.length = get_int(j, "dataset", "length", d.length);
    d.noise_sigma = get_double(j, "dataset", "noise_sigma", d.noise_sigma);
    d.context_len = get_int(j, "dataset", "context_len", d.context_len);
    d.horizon = get_int(j, "dataset", "horizon", d.context_len);
    d.mode = get_enum(j, "dataset", "mode", standardization_mode_from_string, d.mode);
    d.axis = get_enum(j, "dataset", "axis", split_axis_from_string, d.axis);
    d.subsample = get_enum(j, "dataset", "subsample", subsample_rule_from_string, d.subsample);
    d.train_stride = get_int(j, "dataset", "train_stride", d.train_stride);
    d.eval_stride = get_int(j, "dataset", "eval_stride", d.eval_stride);
    d.description = get_string(j, "dataset", "description", d.description);
}

void parse_model(const json& j, ModelSpec& m) {
    if (find(j, "context_len"))
        bad_field("model.context_len", "owned by the dataset section");
    check_keys(j, "the model section",
               {"use_vision", "use_text", "image_size", "patch_size", "line_thickness",
                "vision_layers", "d_v", "vision_heads", "vision_prompt_len", "vision_schedule",
                "max_text_len", "text_layers", "d_t", "text_heads", "text_prompt_len",
                "text_schedule", "patch_len", "ts_layers", "d_ts", "ts_heads", "ts_prompt_len",
                "ts_schedule", "causal_ts", "prompt_sigma", "interaction_sigma"});
    m.use_vision = get_bool(j, "model", "use_vision", m.use_vision);
    m.use_text = get_bool(j, "model", "use_text", m.use_text);
    m.image_size = get_int(j, "model", "image_size", m.image_size);
    m.patch_size = get_int(j, "model", "patch_size", m.patch_size);
    m.line_thickness = get_int(j, "model", "line_thickness", m.line_thickness);
    m.vision_layers = get_int(j, "model", "vision_layers", m.vision_layers);
    m.d_v = get_int(j, "model", "d_v", m.d_v);
    m.vision_heads = get_int(j, "model", "vision_heads", m.vision_heads);
    m.vision_prompt_len = get_int(j, "model", "vision_prompt_len", m.vision_prompt_len);
    m.vision_schedule =
        get_enum(j, "model", "vision_schedule", prompt_variant_from_string, m.vision_schedule);
    m.max_text_len = get_int(j, "model", "max_text_len", m.max_text_len);
    m.text_layers = get_int(j, "model", "text_layers", m.text_layers);
    m.d_t = get_int(j, "model", "d_t", m.d_t);
    m.text_heads = get_int(j, "model", "text_heads", m.text_heads);
    m.text_prompt_len = get_int(j, "model", "text_prompt_len", m.text_prompt_len);
    m.text_schedule =
        get_enum(j, "model", "text_schedule", prompt_variant_from_string, m.text_schedule);
    m.patch_len = get_int(j, "model", "patch_len", m.patch_len);
    m.ts_layers = get_int(j, "model", "ts_layers", m.ts_layers);
    m.d_ts = get_int(j, "model", "d_ts", m.d_ts);
    m.ts_heads = get_int(j, "model", "ts_heads", m.ts_heads);
    m.ts_prompt_len = get_int(j, "model", "ts_prompt_len", m.ts_prompt_len);
    m.ts_schedule =
        get_enum(j, "model", "ts_schedule", prompt_variant_from_string, m.ts_schedule);
    m.causal_ts = get_bool(j, "model", "causal_ts", m.causal_ts);
    m.prompt_sigma = get_double(j, "model", "prompt_sigma", m.prompt_sigma);
    m.interaction_sigma = get_double(j, "model", "interaction_sigma", m.interaction_sigma);
}

void parse_train(const json& j, TrainConfig& t) {
    if (find(j, "seed")) bad_field("train.seed", "owned by the top level");
    if (find(j, "description_text"))
        bad_field("train.description_text", "owned by dataset.description");
    check_keys(j, "the train section",
               {"learning_rate", "lr_multiplier", "epochs", "batch_size", "weight_decay",
                "beta1", "beta2", "eps", "data_fraction"});
    t.learning_rate = get_double(j, "train", "learning_rate", t.learning_rate);
    t.lr_multiplier = get_double(j, "train", "lr_multiplier", t.lr_multiplier);
    t.epochs = get_int(j, "train", "epochs", t.epochs);
    t.batch_size = get_int(j, "train", "batch_size", t.batch_size);
    t.weight_decay = get_double(j, "train", "weight_decay", t.weight_decay);
    t.beta1 = get_double(j, "train", "beta1", t.beta1);
    t.beta2 = get_double(j, "train", "beta2", t.beta2);
    t.eps = get_double(j, "train", "eps", t.eps);
    t.data_fraction = get_double(j, "train", "data_fraction", t.data_fraction);
}

void require(bool ok, const std::string& field, const std::string& msg) {
    if (!ok) bad_field(field, msg);
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(std::string("config: not valid JSON: ") + e.what());
    }
    check_keys(j, "the top level", {"schema_version", "seed", "out_dir", "dataset", "model", "train"});
    int version = get_int(j, "", "schema_version", 1);
    if (version != 1)
        bad_field("schema_version", "unsupported value " + std::to_string(version));

    RunConfig c;
    c.seed = get_u64(j, "", "seed", c.seed);
    c.out_dir = get_string(j, "", "out_dir", c.out_dir);
    if (const json* d = find(j, "dataset")) parse_dataset(*d, c.dataset);
    if (const json* m = find(j, "model")) parse_model(*m, c.model);
    if (const json* t = find(j, "train")) parse_train(*t, c.train);

    c.model.context_len = c.dataset.context_len;
    c.train.seed = c.seed;
    c.train.description_text = c.dataset.description;
    validate_run_config(c);
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("config: cannot read '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig c = parse_run_config(buf.str());
    if (!c.dataset.synthetic && !std::filesystem::exists(c.dataset.path))
        bad_field("dataset.path", "file not found: '" + c.dataset.path + "'");
    return c;
}

void validate_run_config(const RunConfig& c) {
    const DatasetSection& d = c.dataset;
    require(d.context_len >= 2, "dataset.context_len", "must be at least 2");
    require(d.horizon == d.context_len, "dataset.horizon",
            "must equal dataset.context_len; the forecaster emits one context length");
    require(d.train_stride >= 0, "dataset.train_stride", "must be nonnegative");
    require(d.eval_stride >= 0, "dataset.eval_stride", "must be nonnegative");
    if (d.synthetic) {
        require(d.num_series >= 1, "dataset.num_series", "must be positive");
        require(d.length >= 2, "dataset.length", "must be at least 2");
        require(d.noise_sigma >= 0.0, "dataset.noise_sigma", "must be nonnegative");
    } else {
        require(!d.path.empty(), "dataset.path", "required when dataset.synthetic is false");
    }

    const ModelSpec& m = c.model;
    require(m.patch_size >= 1, "model.patch_size", "must be positive");
    require(m.image_size >= m.patch_size && m.image_size % m.patch_size == 0,
            "model.image_size", "must be a positive multiple of model.patch_size");
    require(m.line_thickness >= 1, "model.line_thickness", "must be positive");
    require(m.vision_layers >= 0, "model.vision_layers", "must be nonnegative");
    require(m.text_layers >= 0, "model.text_layers", "must be nonnegative");
    require(m.ts_layers >= 0, "model.ts_layers", "must be nonnegative");
    require(m.vision_heads >= 1 && m.d_v >= 1 && m.d_v % m.vision_heads == 0, "model.d_v",
            "must be a positive multiple of model.vision_heads");
    require(m.text_heads >= 1 && m.d_t >= 1 && m.d_t % m.text_heads == 0, "model.d_t",
            "must be a positive multiple of model.text_heads");
    require(m.ts_heads >= 1 && m.d_ts >= 1 && m.d_ts % m.ts_heads == 0, "model.d_ts",
            "must be a positive multiple of model.ts_heads");
    require(m.vision_prompt_len >= 0, "model.vision_prompt_len", "must be nonnegative");
    require(m.text_prompt_len >= 0, "model.text_prompt_len", "must be nonnegative");
    require(m.ts_prompt_len >= 0, "model.ts_prompt_len", "must be nonnegative");
    require(m.max_text_len >= 1, "model.max_text_len", "must be positive");
    require(m.patch_len >= 0, "model.patch_len", "must be nonnegative (0 selects automatically)");
    if (m.patch_len > 0)
        require(d.context_len % m.patch_len == 0, "model.patch_len",
                "must divide dataset.context_len");
    require(m.prompt_sigma >= 0.0, "model.prompt_sigma", "must be nonnegative");
    require(m.interaction_sigma >= 0.0, "model.interaction_sigma", "must be nonnegative");

    const TrainConfig& t = c.train;
    require(t.learning_rate > 0.0, "train.learning_rate", "must be positive");
    require(t.lr_multiplier > 0.0, "train.lr_multiplier", "must be positive");
    require(t.epochs >= 1, "train.epochs", "must be at least 1");
    require(t.batch_size >= 1, "train.batch_size", "must be positive");
    require(t.weight_decay >= 0.0, "train.weight_decay", "must be nonnegative");
    require(t.beta1 >= 0.0 && t.beta1 < 1.0, "train.beta1", "must lie in [0, 1)");
    require(t.beta2 >= 0.0 && t.beta2 < 1.0, "train.beta2", "must lie in [0, 1)");
    require(t.eps > 0.0, "train.eps", "must be positive");
    require(t.data_fraction > 0.0 && t.data_fraction <= 1.0, "train.data_fraction",
            "must lie in (0, 1]");
}

std::string run_config_snapshot(const RunConfig& c) {
    json j;
    j["schema_version"] = 1;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;

    json d;
    d["name"] = c.dataset.name;
    d["synthetic"] = c.dataset.synthetic;
    d["path"] = c.dataset.path;
    d["schema"] = to_string(c.dataset.schema);
    d["kind"] = to_string(c.dataset.kind);
    d["num_series"] = c.dataset.num_series;
    d["length"] = c.dataset.length;
    d["noise_sigma"] = c.dataset.noise_sigma;
    d["context_len"] = c.dataset.context_len;
    d["horizon"] = c.dataset.horizon;
    d["mode"] = to_string(c.dataset.mode);
    d["axis"] = to_string(c.dataset.axis);
    d["subsample"] = to_string(c.dataset.subsample);
    d["train_stride"] = c.dataset.train_stride;
    d["eval_stride"] = c.dataset.eval_stride;
    d["description"] = c.dataset.description;
    j["dataset"] = d;

    json m;
    m["use_vision"] = c.model.use_vision;
    m["use_text"] = c.model.use_text;
    m["image_size"] = c.model.image_size;
    m["patch_size"] = c.model.patch_size;
    m["line_thickness"] = c.model.line_thickness;
    m["vision_layers"] = c.model.vision_layers;
    m["d_v"] = c.model.d_v;
    m["vision_heads"] = c.model.vision_heads;
    m["vision_prompt_len"] = c.model.vision_prompt_len;
    m["vision_schedule"] = to_string(c.model.vision_schedule);
    m["max_text_len"] = c.model.max_text_len;
    m["text_layers"] = c.model.text_layers;
    m["d_t"] = c.model.d_t;
    m["text_heads"] = c.model.text_heads;
    m["text_prompt_len"] = c.model.text_prompt_len;
    m["text_schedule"] = to_string(c.model.text_schedule);
    m["patch_len"] = c.model.patch_len;
    m["ts_layers"] = c.model.ts_layers;
    m["d_ts"] = c.model.d_ts;
    m["ts_heads"] = c.model.ts_heads;
    m["ts_prompt_len"] = c.model.ts_prompt_len;
    m["ts_schedule"] = to_string(c.model.ts_schedule);
    m["causal_ts"] = c.model.causal_ts;
    m["prompt_sigma"] = c.model.prompt_sigma;
    m["interaction_sigma"] = c.model.interaction_sigma;
    j["model"] = m;

    json t;
    t["learning_rate"] = c.train.learning_rate;
    t["lr_multiplier"] = c.train.lr_multiplier;
    t["epochs"] = c.train.epochs;
    t["batch_size"] = c.train.batch_size;
    t["weight_decay"] = c.train.weight_decay;
    t["beta1"] = c.train.beta1;
    t["beta2"] = c.train.beta2;
    t["eps"] = c.train.eps;
    t["data_fraction"] = c.train.data_fraction;
    j["train"] = t;

    return j.dump(2) + "\n";
}

void write_config_snapshot(const RunConfig& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write '" + path + "'");
    out << run_config_snapshot(c);
}

SeriesCollection build_collection(const RunConfig& c) {
    SeriesCollection col;
    if (c.dataset.synthetic) {
        SynthSpec s;
        s.kind = c.dataset.kind;
        s.num_series = c.dataset.num_series;
        s.length = c.dataset.length;
        s.noise_sigma = c.dataset.noise_sigma;
        s.seed = c.seed;
        col = make_synthetic(s);
    } else {
        col = load_collection(c.dataset.path, c.dataset.schema);
    }
    col.name = c.dataset.name;
    col.context_len = c.dataset.context_len;
    col.horizon = c.dataset.horizon;
    col.mode = c.dataset.mode;
    col.axis = c.dataset.axis;
    col.subsample = c.dataset.subsample;
    return col;
}

PreparedData build_dataset(const RunConfig& c) {
    SeriesCollection col = build_collection(c);
    Rng root(c.seed);
    return prepare_dataset(col, root, c.dataset.train_stride, c.dataset.eval_stride);
}

}  // namespace unicast
