#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hgad/tensor.hpp"

namespace hgad::ad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list. Holds the first/second
/// moment accumulators; step() consumes the grads populated by backward and
/// zeroes them afterwards.
class Adam {
public:
    Adam(std::vector<TensorPtr> params, AdamConfig config = {});

    /// One Adam update. Every parameter must have a grad buffer (populated by
    /// at least one backward pass); a missing buffer is a not-ready error.
    void step();

    void zero_grad();

    std::uint64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return config_; }

private:
    std::vector<TensorPtr> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig config_;
    std::uint64_t step_count_ = 0;
};

}  // namespace hgad::ad
