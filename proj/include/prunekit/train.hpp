#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/model.hpp"

namespace prunekit {

// Constant-LR SGD with momentum; no schedules. convergence_tol is the
// relative change of the EMA-smoothed validation loss between consecutive
// epochs below which training stops (earliest at epoch 2).
struct TrainConfig {
    double learning_rate = 1.6e-4;
    double momentum = 0.9;
    double weight_decay = 0.0;
    int batch_size = 32;
    int max_epochs = 100;
    double convergence_tol = 1e-4;
    double smoothing_alpha = 0.3;  // L~_t = alpha*L_t + (1-alpha)*L~_{t-1}

    void validate() const;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double smoothed_val_loss = 0.0;
    double top1 = 0.0;  // validation top-1
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;  // epoch with the lowest raw validation loss
    std::string stop_reason;  // "converged" or "max_epochs"
};

struct EvalResult {
    double top1 = 0.0;
    double top5 = 0.0;  // top-min(5, classes); ties resolved to the lower class index
    double mean_loss = 0.0;
    std::int64_t n = 0;
};

struct TrainOutcome {
    ModelGraph model;  // weights from the best-validation epoch
    TrainHistory history;
};

// Forward pass over a float32 NCHW batch; returns logits (batch x classes) in
// double precision. The graph is executed sequentially; `add` sums the
// current activation with the running skip anchor (the model input at first,
// then the output of each `add` in turn). Declared layer shapes are
// cross-checked against the propagated ones.
std::vector<double> forward_logits(const ModelGraph& model, std::span<const float> images,
                                   std::int64_t batch);

// Mean softmax cross-entropy of the batch.
double batch_loss(const ModelGraph& model, std::span<const float> images,
                  std::span<const std::int64_t> labels, std::int64_t batch);

// Analytic gradient of the mean cross-entropy with respect to every model
// parameter, flat and index-aligned with ModelGraph::weights.
std::pair<double, std::vector<double>> batch_gradients(const ModelGraph& model,
                                                       std::span<const float> images,
                                                       std::span<const std::int64_t> labels,
                                                       std::int64_t batch);

// He-normal weight init (std = sqrt(2 / fan_in)), zero biases.
void init_weights(ModelGraph& model, std::uint64_t seed);

struct SgdState {
    std::vector<double> velocity;  // index-aligned with ModelGraph::weights
};

// One SGD step: v = momentum*v + g + weight_decay*w (decay on weight regions
// only, never biases), w -= lr*v. Afterwards every masked-out weight is set
// to exactly 0 and its velocity cleared, so no state can resurrect it.
// mask may be null for dense training.
void masked_step(ModelGraph& model, std::span<const double> grads, const SparsityMask* mask,
                 const TrainConfig& config, SgdState& state);

// Epoch loop with per-epoch shuffling, validation, EMA-based early stopping,
// and best-validation model selection. All randomness comes from seed.
// Throws NumericError if the loss turns non-finite.
TrainOutcome finetune(const ModelGraph& model, const SparsityMask* mask, const Dataset& train,
                      const Dataset& val, const TrainConfig& config, std::uint64_t seed);

EvalResult evaluate(const ModelGraph& model, const Dataset& ds, int batch_size = 256);

// CSV columns: epoch,train_loss,val_loss,smoothed_val_loss,top1
void save_history_csv(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace prunekit
