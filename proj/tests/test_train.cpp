#include <doctest.h>

#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "unicast/data.hpp"
#include "unicast/errors.hpp"
#include "unicast/model.hpp"
#include "unicast/rng.hpp"
#include "unicast/train.hpp"

using namespace unicast;

namespace {

ModelSpec tiny_spec() {
    ModelSpec s;
    s.image_size = 16;
    s.vision_layers = 1;
    s.d_v = 16;
    s.vision_heads = 2;
    s.vision_prompt_len = 2;
    s.max_text_len = 8;
    s.text_layers = 1;
    s.d_t = 16;
    s.text_heads = 2;
    s.text_prompt_len = 2;
    s.context_len = 8;
    s.ts_layers = 1;
    s.d_ts = 16;
    s.ts_heads = 2;
    s.ts_prompt_len = 2;
    return s;
}

// Sliding sine windows, already in a standardized-ish range.
std::vector<WindowPair> sine_windows(int count, double amp = 1.0) {
    std::vector<WindowPair> out;
    for (int k = 0; k < count; ++k) {
        WindowPair w;
        for (int i = 0; i < 8; ++i) w.context.push_back(amp * std::sin(0.37 * (k + i)));
        for (int i = 8; i < 16; ++i) w.target.push_back(amp * std::sin(0.37 * (k + i)));
        w.source_id = 0;
        w.offset = k;
        out.push_back(std::move(w));
    }
    return out;
}

TrainConfig quick_config() {
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 8;
    c.seed = 11;
    c.description_text = "synthetic sine waves";
    return c;
}

Tensor trainable_leaf(const Shape& shape, const std::vector<double>& v) {
    Rng r(1);
    Tensor t = seeded_init(shape, Init::zeros(), r, true);
    t.mutable_data() = v;
    return t;
}

struct TempPath {
    std::string path;
    explicit TempPath(const std::string& name) : path("tmp_" + name) {}
    ~TempPath() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("mse_loss: hand oracles") {
    CHECK(mse_loss({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(mse_loss({0, 0}, {1, 1}) == 1.0);
    CHECK(mse_loss({1, 2, 3}, {2, 4, 3}) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(mse_loss({1, 2}, {1, 2, 3}), dimension_error);
    CHECK_THROWS_AS(mse_loss(std::vector<double>{}, std::vector<double>{}), dimension_error);
}

TEST_CASE("mse_loss: tensor form matches and differentiates") {
    Tensor a = Tensor::from_data({3}, {1, 2, 3});
    Tensor b = Tensor::from_data({3}, {2, 4, 3});
    CHECK(mse_loss(a, b).value() == doctest::Approx(5.0 / 3.0).epsilon(1e-15));

    Tensor p = trainable_leaf({3}, {1, 2, 3});
    Tensor loss = mse_loss(p, b);
    backward(loss);
    // d/dp_i = 2 (p_i - y_i) / n
    CHECK(p.grad()[0] == doctest::Approx(2.0 * (1 - 2) / 3.0).epsilon(1e-15));
    CHECK(p.grad()[1] == doctest::Approx(2.0 * (2 - 4) / 3.0).epsilon(1e-15));
    CHECK(p.grad()[2] == doctest::Approx(0.0));

    Tensor wide = Tensor::from_data({1, 3}, {1, 2, 3});
    CHECK_THROWS_AS(mse_loss(wide, b), dimension_error);
}

TEST_CASE("optimizer: first step follows the closed form") {
    Tensor p = trainable_leaf({1}, {0.5});
    AdamW opt({{"p", p}}, 1e-3, 0.0, 0.9, 0.999, 1e-8);

    backward(sum_all(p));  // gradient exactly 1
    opt.step();
    // mhat = vhat = 1 at step 1, so the move is lr / (1 + eps).
    CHECK(p.value() == doctest::Approx(0.5 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-14));

    // Second identical gradient: replicate the recurrence independently.
    opt.zero_grad();
    backward(sum_all(p));
    opt.step();
    double m = 0.9 * 0.1 + 0.1 * 1.0;
    double v = 0.999 * 0.001 + 0.001 * 1.0;
    double mhat = m / (1.0 - 0.9 * 0.9);
    double vhat = v / (1.0 - 0.999 * 0.999);
    double expect = (0.5 - 1e-3 / (1.0 + 1e-8)) - 1e-3 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(p.value() == doctest::Approx(expect).epsilon(1e-13));
    CHECK(opt.steps_taken() == 2);
}

TEST_CASE("optimizer: zero gradient leaves parameters alone without decay") {
    Tensor p = trainable_leaf({2}, {1.25, -3.5});
    AdamW opt({{"p", p}}, 1e-2, 0.0, 0.9, 0.999, 1e-8);
    backward(scale(sum_all(p), 0.0));  // gradient present and exactly zero
    opt.step();
    CHECK(p.values()[0] == 1.25);
    CHECK(p.values()[1] == -3.5);
}

TEST_CASE("optimizer: decoupled decay shrinks multiplicatively at zero gradient") {
    Tensor p = trainable_leaf({1}, {2.0});
    double lr = 1e-2, wd = 0.1;
    AdamW opt({{"p", p}}, lr, wd, 0.9, 0.999, 1e-8);
    backward(scale(sum_all(p), 0.0));
    opt.step();
    CHECK(p.value() == doctest::Approx(2.0 * (1.0 - lr * wd)).epsilon(1e-15));
}

TEST_CASE("optimizer: absent gradient skips the parameter") {
    Tensor p = trainable_leaf({1}, {1.0});
    Tensor q = trainable_leaf({1}, {1.0});
    AdamW opt({{"p", p}, {"q", q}}, 1e-2, 0.1, 0.9, 0.999, 1e-8);
    backward(sum_all(p));  // only p gets a gradient buffer
    opt.step();
    CHECK(p.value() != 1.0);
    CHECK(q.value() == 1.0);
}

TEST_CASE("optimizer: non-finite gradient aborts with the parameter name") {
    Tensor p = trainable_leaf({1}, {1.0});
    AdamW opt({{"vision.prompt.1", p}}, 1e-2, 0.0, 0.9, 0.999, 1e-8);
    double bad = std::numeric_limits<double>::quiet_NaN();
    backward(sum_all(scale(p, bad)));
    CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("vision.prompt.1"), numeric_error);
}

TEST_CASE("freeze mask is exactly the adaptation set") {
    UniCastModel m = build_model(tiny_spec(), 5);
    std::set<uint64_t> mask = build_freeze_mask(m);
    // 3 prompt tensors + 2x2 interaction + 2 head tensors.
    CHECK(mask.size() == 9);
    for (const NamedTensor& nt : all_parameters(m)) {
        CAPTURE(nt.name);
        CHECK(nt.tensor.requires_grad() == (mask.count(nt.tensor.id()) == 1));
    }

    ModelSpec bare = tiny_spec();
    bare.use_vision = false;
    bare.use_text = false;
    bare.ts_prompt_len = 0;
    UniCastModel m2 = build_model(bare, 5);
    std::set<uint64_t> mask2 = build_freeze_mask(m2);
    CHECK(mask2.size() == 2);  // head weight and bias only
}

TEST_CASE("train: epoch count, determinism, and config validation") {
    std::vector<WindowPair> tr = sine_windows(24);
    std::vector<WindowPair> va = sine_windows(6);

    TrainConfig c = quick_config();
    c.epochs = 1;
    UniCastModel m1 = build_model(tiny_spec(), 3);
    TrainHistory h1 = train(m1, tr, va, c);
    CHECK(h1.train_loss.size() == 1);
    CHECK(h1.val_mse.size() == 1);
    CHECK(h1.seconds.size() == 1);
    CHECK(h1.update_norm.size() == 1);
    CHECK_FALSE(h1.diverged);
    CHECK(std::isfinite(h1.initial_val_mse));

    UniCastModel m2 = build_model(tiny_spec(), 3);
    TrainHistory h2 = train(m2, tr, va, c);
    CHECK(h1.train_loss == h2.train_loss);
    CHECK(h1.val_mse == h2.val_mse);
    CHECK(h1.update_norm == h2.update_norm);
    CHECK(h1.initial_val_mse == h2.initial_val_mse);

    TrainConfig bad = c;
    bad.epochs = 0;
    CHECK_THROWS_AS(train(m1, tr, va, bad), config_error);
    bad = c;
    bad.data_fraction = 0.0;
    CHECK_THROWS_AS(train(m1, tr, va, bad), config_error);
    bad = c;
    bad.data_fraction = 1.5;
    CHECK_THROWS_AS(train(m1, tr, va, bad), config_error);
    CHECK_THROWS_AS(train(m1, {}, va, c), input_error);
}

TEST_CASE("train: frozen tensors never move, trainable ones do") {
    std::vector<WindowPair> tr = sine_windows(16);
    UniCastModel m = build_model(tiny_spec(), 7);

    std::vector<std::pair<std::string, std::vector<double>>> before;
    for (const NamedTensor& nt : all_parameters(m)) before.push_back({nt.name, nt.tensor.values()});

    TrainConfig c = quick_config();
    c.epochs = 3;
    c.lr_multiplier = 100.0;
    train(m, tr, {}, c);

    size_t i = 0;
    bool any_moved = false;
    for (const NamedTensor& nt : all_parameters(m)) {
        CAPTURE(nt.name);
        REQUIRE(before[i].first == nt.name);
        if (nt.tensor.requires_grad()) {
            if (nt.tensor.values() != before[i].second) any_moved = true;
        } else {
            CHECK(nt.tensor.values() == before[i].second);
        }
        ++i;
    }
    CHECK(any_moved);
}

TEST_CASE("train: optimizer state does not leak across runs") {
    std::vector<WindowPair> tr = sine_windows(16);
    TrainConfig b = quick_config();

    UniCastModel fresh = build_model(tiny_spec(), 9);
    TrainHistory alone = train(fresh, tr, {}, b);

    // An unrelated run in between must not perturb the second one.
    UniCastModel other = build_model(tiny_spec(), 21);
    TrainConfig a = quick_config();
    a.seed = 99;
    a.epochs = 1;
    train(other, tr, {}, a);

    UniCastModel again = build_model(tiny_spec(), 9);
    TrainHistory after = train(again, tr, {}, b);
    CHECK(alone.train_loss == after.train_loss);
    CHECK(alone.update_norm == after.update_norm);

    size_t i = 0;
    std::vector<NamedTensor> ap = all_parameters(fresh);
    for (const NamedTensor& nt : all_parameters(again)) {
        CHECK(nt.tensor.values() == ap[i].tensor.values());
        ++i;
    }
}

TEST_CASE("train: loss falls on the sine task") {
    std::vector<WindowPair> tr = sine_windows(32);
    std::vector<WindowPair> va = sine_windows(8);
    UniCastModel m = build_model(tiny_spec(), 13);

    TrainConfig c = quick_config();
    c.epochs = 4;
    c.batch_size = 8;
    c.lr_multiplier = 500.0;  // 2e-5 is sized for full-scale backbones
    TrainHistory h = train(m, tr, va, c);
    REQUIRE(h.train_loss.size() == 4);
    CHECK(h.train_loss.back() < h.train_loss.front());
    CHECK(h.val_mse.back() < h.initial_val_mse);
}

TEST_CASE("train: data fraction subsamples deterministically") {
    std::vector<WindowPair> tr = sine_windows(20);
    TrainConfig c = quick_config();
    c.epochs = 1;
    c.data_fraction = 0.5;

    UniCastModel m1 = build_model(tiny_spec(), 15);
    TrainHistory h1 = train(m1, tr, {}, c);
    UniCastModel m2 = build_model(tiny_spec(), 15);
    TrainHistory h2 = train(m2, tr, {}, c);
    CHECK(h1.train_loss == h2.train_loss);

    c.data_fraction = 1.0;
    UniCastModel m3 = build_model(tiny_spec(), 15);
    TrainHistory h3 = train(m3, tr, {}, c);
    CHECK(h1.train_loss != h3.train_loss);
}

TEST_CASE("train: runaway loss stops the run with history kept") {
    // Targets four orders of magnitude beyond the forecast scale push the
    // first epoch's loss over the ceiling.
    std::vector<WindowPair> tr = sine_windows(8, 1e4);
    UniCastModel m = build_model(tiny_spec(), 17);
    TrainConfig c = quick_config();
    c.epochs = 5;
    TrainHistory h = train(m, tr, {}, c);
    CHECK(h.diverged);
    CHECK(h.train_loss.size() == 1);
    CHECK(h.train_loss[0] > 1e6);
}

TEST_CASE("train: validation matches the inference entry point") {
    std::vector<WindowPair> va = sine_windows(3);
    UniCastModel m = build_model(tiny_spec(), 19);
    DatasetDescription d{"synthetic sine waves"};
    double mean = validation_mse(m, va, d);
    double acc = 0.0;
    for (const WindowPair& w : va) {
        acc += mse_loss(unicast_forward(w.context, d, m), w.target);
    }
    CHECK(mean == acc / 3.0);
    CHECK(std::isnan(validation_mse(m, {}, d)));
}

TEST_CASE("history files: csv layout and json round-trip") {
    std::vector<WindowPair> tr = sine_windows(12);
    std::vector<WindowPair> va = sine_windows(4);
    UniCastModel m = build_model(tiny_spec(), 23);
    TrainConfig c = quick_config();
    TrainHistory h = train(m, tr, va, c);

    TempPath csv("history.csv");
    write_history_csv(h, csv.path);
    std::ifstream in(csv.path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "epoch,train_loss,val_mse");
    int rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 2);

    TempPath js("history.json");
    write_history_json(h, c, js.path);
    std::ifstream jin(js.path);
    std::stringstream buf;
    buf << jin.rdbuf();
    auto j = nlohmann::json::parse(buf.str());
    CHECK(j["schema_version"] == 1);
    CHECK(j["train_loss"].size() == 2);
    CHECK(j["update_norm"].size() == 2);
    CHECK(j["config"]["epochs"] == 2);
    CHECK(j["config"]["seed"] == 11);
    CHECK(j["diverged"] == false);
    CHECK(j["train_loss"][0].get<double>() == h.train_loss[0]);
}
