#include "hgad/adam.hpp"

#include <cmath>

#include "hgad/error.hpp"

namespace hgad::ad {

Adam::Adam(std::vector<TensorPtr> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void Adam::step() {
    for (std::size_t k = 0; k < params_.size(); ++k) {
        if (!params_[k]->grad_ready()) {
            throw TapeError("adam step " + std::to_string(step_count_ + 1) +
                            ": parameter " + std::to_string(k) +
                            " has no gradient; run backward first");
        }
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = *params_[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p.values[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
        p.zero_grad();
    }
}

void Adam::zero_grad() {
    for (const auto& p : params_) {
        p->ensure_grad();
        p->zero_grad();
    }
}

}  // namespace hgad::ad
