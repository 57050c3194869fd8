#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "unicast/data.hpp"
#include "unicast/model.hpp"
#include "unicast/tensor.hpp"

namespace unicast {

// Everything a training run depends on besides the model and the windows.
// description_text is the dataset blurb fed to the text branch with every
// window; it travels with the config because it is fixed per run.
struct TrainConfig {
    double learning_rate = 2e-5;
    // Desk-scale runs need a larger step than the full-scale default.
    // Recorded separately so the base rate stays visible in snapshots.
    double lr_multiplier = 1.0;
    int epochs = 10;
    int batch_size = 32;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 0;
    double data_fraction = 1.0;  // (0, 1]; subsampled once before epoch 1
    std::string description_text;
};

// Per-epoch trace of one run. The arrays share one length: the number of
// completed epochs (shorter than config.epochs only after divergence).
// initial_val_mse is measured before the first update, so convergence can
// be judged against the untrained-adapter baseline.
struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_mse;
    std::vector<double> seconds;
    std::vector<double> update_norm;
    double initial_val_mse = 0.0;
    bool diverged = false;
};

// Ids of the tensors the optimizer may touch: prompts, interaction layers,
// head. Everything else in the model stays frozen.
std::set<uint64_t> build_freeze_mask(const UniCastModel& model);

// Mean squared error. Length mismatch -> dimension_error.
double mse_loss(const std::vector<double>& predicted, const std::vector<double>& target);

// Differentiable variant; shapes must match exactly.
Tensor mse_loss(const Tensor& predicted, const Tensor& target);

// Adaptive-moment optimizer with decoupled weight decay:
//   p <- p - lr * mhat / (sqrt(vhat) + eps) - lr * wd * p
// Moment buffers persist for the lifetime of the object and follow the
// parameter order given at construction. A non-finite gradient aborts with
// the parameter's name. Parameters whose gradient buffer is absent are
// skipped that step.
class AdamW {
  public:
    AdamW(std::vector<NamedTensor> params, double lr, double weight_decay, double beta1,
          double beta2, double eps);

    void step();
    void zero_grad();
    int64_t steps_taken() const { return t_; }

  private:
    struct Moments {
        std::vector<double> m, v;
    };
    std::vector<NamedTensor> params_;
    std::vector<Moments> moments_;
    double lr_, wd_, b1_, b2_, eps_;
    int64_t t_ = 0;
};

// Mean forecast MSE over a window set, no graph construction. Returns NaN
// for an empty set.
double validation_mse(const UniCastModel& model, const std::vector<WindowPair>& windows,
                      const DatasetDescription& description);

// Freeze-masked training. Shuffles mini-batches per epoch (seeded), records
// train loss, validation MSE, wall-clock seconds, and the L2 norm of the
// epoch's parameter movement. data_fraction < 1 subsamples the train
// windows once, before epoch 1. A non-finite or > 1e6 epoch loss stops the
// run and returns the history so far with diverged set.
TrainHistory train(UniCastModel& model, const std::vector<WindowPair>& train_windows,
                   const std::vector<WindowPair>& val_windows, const TrainConfig& config);

// CSV trace: header epoch,train_loss,val_mse. Wall-clock seconds are kept
// out of the CSV on purpose: the same config and seed must reproduce this
// file byte for byte. Timing lives in the JSON export.
void write_history_csv(const TrainHistory& history, const std::string& path);
void write_history_json(const TrainHistory& history, const TrainConfig& config,
                        const std::string& path);

}  // namespace unicast
