#include "hgad/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "hgad/error.hpp"

namespace hgad {

void TrainConfig::validate() const {
    dims.validate();
    ablation.validate();
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(mask_p >= 0.0 && mask_p < 1.0)) throw ConfigError("mask_p must lie in [0,1)");
    if (!(loss_floor > 0.0)) throw ConfigError("loss_floor must be positive");
}

std::string TrainReport::to_json() const {
    nlohmann::json j{{"epoch_train_loss", epoch_train_loss},
                     {"epoch_valid_loss", epoch_valid_loss},
                     {"stop_reason", stop_reason},
                     {"stop_detail", stop_detail},
                     {"best_epoch", best_epoch},
                     {"best_valid_loss", best_valid_loss},
                     {"wall_seconds", wall_seconds},
                     {"ablation", ablation},
                     {"seed", seed},
                     {"checkpoint_path", checkpoint_path}};
    return j.dump(2);
}

double evaluate_loss(const ModelParams& params, const std::vector<WindowSample>& windows) {
    if (windows.empty()) throw DataError("evaluate_loss: no windows");
    double acc = 0.0;
    for (const auto& w : windows) {
        auto pred = forward(params, w).prediction;
        const std::size_t L = w.target.size();
        double mse = 0.0;
        for (std::size_t i = 0; i < L; ++i) {
            const double d = pred->values[i] - w.target[i];
            mse += d * d;
        }
        acc += mse / static_cast<double>(L);
    }
    return acc / static_cast<double>(windows.size());
}

TrainResult train(const SeriesFrame& train_frame, const SeriesFrame& valid_frame,
                  const TrainConfig& config) {
    config.validate();
    train_frame.schema.validate();
    if (!(train_frame.schema == valid_frame.schema)) {
        throw DataError("train and validation frames have different schemas");
    }
    for (const auto* frame : {&train_frame, &valid_frame}) {
        for (std::size_t i = 0; i < frame->values.size(); ++i) {
            if (!std::isfinite(frame->values[i])) {
                throw DataError("non-finite value at row " +
                                std::to_string(i / frame->n_vars()) + ", variable '" +
                                frame->schema[i % frame->n_vars()].name + "'");
            }
        }
    }

    const auto t0 = std::chrono::steady_clock::now();
    const auto train_windows = make_windows(train_frame, config.dims.window);
    const auto valid_windows = make_windows(valid_frame, config.dims.window);

    std::mt19937_64 rng(config.seed);
    ModelParams params = ModelParams::init(train_frame.schema, config.dims, config.ablation, rng);
    ad::Adam optimizer(params.parameters(), {config.learning_rate});
    optimizer.zero_grad();  // allocate every grad buffer (ablated params stay zero)

    std::mt19937_64 mask_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    TrainReport& report = result.report;
    report.ablation = config.ablation.summary();
    report.seed = config.seed;

    double best_valid = std::numeric_limits<double>::infinity();
    std::size_t floor_streak = 0;
    std::size_t val_stall = 0;
    ad::Tape tape;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t processed = 0;
        while (processed < order.size()) {
            const std::size_t batch_end =
                std::min(processed + config.batch_size, order.size());
            const double inv_batch = 1.0 / static_cast<double>(batch_end - processed);
            for (std::size_t b = processed; b < batch_end; ++b) {
                const auto& w = train_windows[order[b]];
                tape.clear();
                ad::TapeScope scope(tape);
                ForwardOptions opts;
                opts.mode = ForwardMode::Train;
                opts.mask_p = config.mask_p;
                opts.mask_rng = &mask_rng;
                auto pred = forward(params, w, opts).prediction;
                auto target = ad::Tensor::make({w.target.size(), 1}, w.target);
                auto loss = ad::mse_loss(pred, target);
                const double loss_v = loss->value();
                if (!std::isfinite(loss_v)) {
                    throw DivergenceError("training diverged: non-finite loss at epoch " +
                                          std::to_string(epoch) + ", window " +
                                          std::to_string(order[b]));
                }
                epoch_loss += loss_v;
                // Scale so accumulated grads equal the batch-mean gradient.
                tape.backward(ad::scale_const(loss, inv_batch));
            }
            optimizer.step();
            processed = batch_end;
        }
        tape.clear();
        epoch_loss /= static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss)) {
            throw DivergenceError("training diverged: non-finite epoch loss at epoch " +
                                  std::to_string(epoch));
        }
        report.epoch_train_loss.push_back(epoch_loss);

        const double valid_loss = evaluate_loss(params, valid_windows);
        report.epoch_valid_loss.push_back(valid_loss);
        if (valid_loss < best_valid) {
            best_valid = valid_loss;
            result.params = params.clone();
            report.best_epoch = epoch;
            report.best_valid_loss = valid_loss;
            val_stall = 0;
        } else {
            ++val_stall;
        }

        floor_streak = epoch_loss < config.loss_floor ? floor_streak + 1 : 0;
        if (floor_streak >= config.floor_patience) {
            report.stop_reason = "early-stop";
            report.stop_detail = "train loss below " + std::to_string(config.loss_floor) +
                                 " for " + std::to_string(config.floor_patience) + " epochs";
            break;
        }
        if (val_stall >= config.val_patience) {
            report.stop_reason = "early-stop";
            report.stop_detail = "validation loss stalled for " +
                                 std::to_string(config.val_patience) + " epochs";
            break;
        }
    }
    if (report.stop_reason.empty()) {
        report.stop_reason = "max-epochs";
        report.stop_detail = "reached max_epochs = " + std::to_string(config.max_epochs);
    }
    if (report.best_epoch == 0) {
        // No epoch improved on infinity only if training ran zero epochs,
        // which validate() rules out; keep the final state as a fallback.
        result.params = params.clone();
        report.best_epoch = report.epoch_train_loss.size();
        report.best_valid_loss = report.epoch_valid_loss.empty()
                                     ? std::numeric_limits<double>::quiet_NaN()
                                     : report.epoch_valid_loss.back();
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace hgad
