#include "unicast/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "unicast/errors.hpp"
#include "unicast/rng.hpp"

namespace unicast {

namespace {

constexpr double kDivergenceCeiling = 1e6;

void validate(const TrainConfig& c) {
    if (c.learning_rate <= 0.0) throw config_error("learning_rate must be > 0");
    if (c.lr_multiplier <= 0.0) throw config_error("lr_multiplier must be > 0");
    if (c.epochs < 1) throw config_error("epochs must be >= 1, got " + std::to_string(c.epochs));
    if (c.batch_size < 1) throw config_error("batch_size must be >= 1");
    if (c.weight_decay < 0.0) throw config_error("weight_decay must be >= 0");
    if (!(c.data_fraction > 0.0) || c.data_fraction > 1.0) {
        throw config_error("data_fraction must lie in (0, 1]");
    }
}

std::vector<NamedTensor> named_trainables(const UniCastModel& model) {
    std::vector<NamedTensor> out;
    for (const NamedTensor& nt : all_parameters(model)) {
        if (nt.tensor.requires_grad()) out.push_back(nt);
    }
    return out;
}

// %.17g round-trips doubles exactly, keeping re-runs byte-comparable.
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::set<uint64_t> build_freeze_mask(const UniCastModel& model) {
    std::set<uint64_t> ids;
    for (const Tensor& t : trainable_parameters(model)) ids.insert(t.id());
    return ids;
}

double mse_loss(const std::vector<double>& predicted, const std::vector<double>& target) {
    if (predicted.size() != target.size()) {
        throw dimension_error("mse_loss lengths differ: " + std::to_string(predicted.size()) +
                              " vs " + std::to_string(target.size()));
    }
    if (predicted.empty()) throw dimension_error("mse_loss of empty vectors");
    double acc = 0.0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        double d = predicted[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(predicted.size());
}

Tensor mse_loss(const Tensor& predicted, const Tensor& target) {
    if (predicted.shape() != target.shape()) {
        throw dimension_error("mse_loss shapes differ: " + shape_str(predicted.shape()) +
                              " vs " + shape_str(target.shape()));
    }
    return mean_square(sub(predicted, target));
}

AdamW::AdamW(std::vector<NamedTensor> params, double lr, double weight_decay, double beta1,
             double beta2, double eps)
    : params_(std::move(params)), lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
    moments_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        size_t n = static_cast<size_t>(params_[i].tensor.size());
        moments_[i].m.assign(n, 0.0);
        moments_[i].v.assign(n, 0.0);
    }
}

void AdamW::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i].tensor;
        if (!p.has_grad()) continue;
        const std::vector<double>& g = p.grad();
        std::vector<double>& data = p.mutable_data();
        Moments& mo = moments_[i];
        for (size_t k = 0; k < g.size(); ++k) {
            if (!std::isfinite(g[k])) {
                throw numeric_error("non-finite gradient in '" + params_[i].name +
                                    "' at element " + std::to_string(k));
            }
            mo.m[k] = b1_ * mo.m[k] + (1.0 - b1_) * g[k];
            mo.v[k] = b2_ * mo.v[k] + (1.0 - b2_) * g[k] * g[k];
            double mhat = mo.m[k] / bc1;
            double vhat = mo.v[k] / bc2;
            data[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_) + lr_ * wd_ * data[k];
        }
    }
}

void AdamW::zero_grad() {
    for (NamedTensor& nt : params_) nt.tensor.zero_grad();
}

double validation_mse(const UniCastModel& model, const std::vector<WindowPair>& windows,
                      const DatasetDescription& description) {
    if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
    NoGradGuard guard;
    double acc = 0.0;
    for (const WindowPair& w : windows) {
        PreparedInput in = prepare_input(w.context, description, model);
        Tensor pred = forecast_prepared(in, model);
        acc += mse_loss(pred.values(), w.target);
    }
    return acc / static_cast<double>(windows.size());
}

TrainHistory train(UniCastModel& model, const std::vector<WindowPair>& train_windows,
                   const std::vector<WindowPair>& val_windows, const TrainConfig& config) {
    validate(config);
    if (train_windows.empty()) throw input_error("train() needs at least one training window");

    DatasetDescription description{config.description_text};
    const Rng root(config.seed);

    // Fraction subsampling happens once, before any epoch.
    std::vector<size_t> pool(train_windows.size());
    std::iota(pool.begin(), pool.end(), size_t{0});
    if (config.data_fraction < 1.0) {
        Rng fr = root.split("fraction");
        fr.shuffle(pool);
        size_t keep = static_cast<size_t>(
            std::floor(config.data_fraction * static_cast<double>(pool.size())));
        pool.resize(std::max<size_t>(1, keep));
        std::sort(pool.begin(), pool.end());
    }

    // Rasterization and tokenization are per-window constants; do them once.
    std::vector<PreparedInput> prepared;
    std::vector<Tensor> targets;
    prepared.reserve(pool.size());
    targets.reserve(pool.size());
    {
        NoGradGuard guard;
        for (size_t idx : pool) {
            const WindowPair& w = train_windows[idx];
            prepared.push_back(prepare_input(w.context, description, model));
            targets.push_back(
                Tensor::from_data({static_cast<int>(w.target.size())}, w.target));
        }
    }

    std::vector<NamedTensor> params = named_trainables(model);
    AdamW opt(params, config.learning_rate * config.lr_multiplier, config.weight_decay,
              config.beta1, config.beta2, config.eps);

    TrainHistory history;
    history.initial_val_mse = validation_mse(model, val_windows, description);

    std::vector<size_t> order(prepared.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        Rng er = root.split("epoch_" + std::to_string(epoch));
        er.shuffle(order);

        std::vector<std::vector<double>> before(params.size());
        for (size_t i = 0; i < params.size(); ++i) before[i] = params[i].tensor.values();

        double loss_sum = 0.0;
        size_t seen = 0;
        bool exploded = false;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            size_t stop = std::min(order.size(), start + config.batch_size);
            double inv = 1.0 / static_cast<double>(stop - start);
            opt.zero_grad();
            for (size_t k = start; k < stop; ++k) {
                size_t idx = order[k];
                Tensor loss = mse_loss(forecast_prepared(prepared[idx], model), targets[idx]);
                // Scaling before backward makes the accumulated gradient the
                // batch mean without touching stored grads afterwards.
                backward(scale(loss, inv));
                double v = loss.value();
                loss_sum += v;
                ++seen;
                if (!std::isfinite(v) || v > kDivergenceCeiling) exploded = true;
            }
            if (exploded) break;
            opt.step();
        }

        double epoch_loss = loss_sum / static_cast<double>(seen);
        double norm_sq = 0.0;
        for (size_t i = 0; i < params.size(); ++i) {
            const std::vector<double>& now = params[i].tensor.values();
            for (size_t k = 0; k < now.size(); ++k) {
                double d = now[k] - before[i][k];
                norm_sq += d * d;
            }
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        history.train_loss.push_back(epoch_loss);
        history.val_mse.push_back(validation_mse(model, val_windows, description));
        history.seconds.push_back(secs);
        history.update_norm.push_back(std::sqrt(norm_sq));

        if (exploded || !std::isfinite(epoch_loss) || epoch_loss > kDivergenceCeiling) {
            history.diverged = true;
            break;
        }
    }
    return history;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write '" + path + "'");
    out << "epoch,train_loss,val_mse\n";
    for (size_t i = 0; i < history.train_loss.size(); ++i) {
        out << (i + 1) << ',' << fmt(history.train_loss[i]) << ',' << fmt(history.val_mse[i])
            << '\n';
    }
}

void write_history_json(const TrainHistory& history, const TrainConfig& config,
                        const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config"] = {{"learning_rate", config.learning_rate},
                   {"lr_multiplier", config.lr_multiplier},
                   {"epochs", config.epochs},
                   {"batch_size", config.batch_size},
                   {"weight_decay", config.weight_decay},
                   {"beta1", config.beta1},
                   {"beta2", config.beta2},
                   {"eps", config.eps},
                   {"seed", config.seed},
                   {"data_fraction", config.data_fraction},
                   {"description_text", config.description_text}};
    j["initial_val_mse"] = history.initial_val_mse;
    j["diverged"] = history.diverged;
    j["train_loss"] = history.train_loss;
    j["val_mse"] = history.val_mse;
    j["seconds"] = history.seconds;
    j["update_norm"] = history.update_norm;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace unicast
