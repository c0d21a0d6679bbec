#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hgad/adam.hpp"
#include "hgad/model.hpp"
#include "hgad/series.hpp"

namespace hgad {

struct TrainConfig {
    ModelDims dims;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 100;
    /// Stop once the epoch mean training loss stays below loss_floor for
    /// floor_patience consecutive epochs.
    double loss_floor = 1e-4;
    std::size_t floor_patience = 10;
    /// Independent guard: stop when validation loss has not improved for
    /// val_patience epochs.
    std::size_t val_patience = 10;
    double mask_p = 0.1;
    std::uint64_t seed = 0;
    AblationFlags ablation;

    void validate() const;
};

struct TrainReport {
    std::vector<double> epoch_train_loss;
    std::vector<double> epoch_valid_loss;
    std::string stop_reason;  // "max-epochs" | "early-stop"
    std::string stop_detail;
    std::size_t best_epoch = 0;  // 1-based epoch of the returned checkpoint
    double best_valid_loss = 0.0;
    double wall_seconds = 0.0;
    std::string ablation = "none";
    std::uint64_t seed = 0;
    std::string checkpoint_path;  // filled by callers that persist the model

    std::string to_json() const;
};

struct TrainResult {
    ModelParams params;  // best-validation checkpoint
    TrainReport report;
};

/// Joint optimization of all parameters on normal data: per-window MSE,
/// Adam over shuffled mini-batches, early stopping, best-validation
/// checkpoint selection. Deterministic under (config, seed, data).
TrainResult train(const SeriesFrame& train_frame, const SeriesFrame& valid_frame,
                  const TrainConfig& config);

/// Mean forward MSE over all windows of a frame (no gradients, no masking).
double evaluate_loss(const ModelParams& params, const std::vector<WindowSample>& windows);

}  // namespace hgad
