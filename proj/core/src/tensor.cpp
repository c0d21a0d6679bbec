#include "hgad/tensor.hpp"

#include <numeric>
#include <sstream>

#include "hgad/error.hpp"

namespace hgad::ad {

namespace {
thread_local Tape* t_active_tape = nullptr;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> vals, bool req_grad)
    : values(std::move(vals)), requires_grad(req_grad), needs_grad(req_grad),
      shape_(std::move(shape)) {
    if (shape_product(shape_) != values.size()) {
        std::ostringstream os;
        os << "tensor shape " << shape_str() << " does not match value count "
           << values.size();
        throw ShapeError(os.str());
    }
}

TensorPtr Tensor::make(std::vector<std::size_t> shape, std::vector<double> values,
                       bool requires_grad) {
    return std::make_shared<Tensor>(std::move(shape), std::move(values), requires_grad);
}

TensorPtr Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::vector<double> v(shape_product(shape), 0.0);
    return make(std::move(shape), std::move(v), requires_grad);
}

TensorPtr Tensor::full(std::vector<std::size_t> shape, double fill, bool requires_grad) {
    std::vector<double> v(shape_product(shape), fill);
    return make(std::move(shape), std::move(v), requires_grad);
}

TensorPtr Tensor::scalar(double v, bool requires_grad) {
    return make({1}, {v}, requires_grad);
}

TensorPtr Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad) {
    return make({rows, cols}, std::move(values), requires_grad);
}

std::size_t Tensor::rows() const {
    if (shape_.empty()) return 1;
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (shape_.size() >= 2) return shape_[1];
    return 1;
}

double& Tensor::at(std::size_t r, std::size_t c) {
    return values[r * cols() + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return values[r * cols() + c];
}

double Tensor::value() const {
    if (values.size() != 1) {
        throw ShapeError("expected scalar tensor, got shape " + shape_str());
    }
    return values[0];
}

void Tensor::ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) grad.assign(values.size(), 0.0);
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << "x";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

void Tape::record(std::function<void()> backward_step) {
    nodes_.push_back(std::move(backward_step));
}

void Tape::backward(const TensorPtr& loss) {
    if (!loss) throw TapeError("backward called with null loss");
    if (loss->size() != 1) {
        throw TapeError("backward requires a scalar loss, got shape " + loss->shape_str());
    }
    if (loss->producer != this || loss->producer_epoch != epoch_) {
        throw TapeError("loss was not produced on the current tape (stale or foreign tape)");
    }
    if (consumed_) {
        throw TapeError("tape already consumed; run a new forward pass before backward");
    }
    consumed_ = true;
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void Tape::clear() {
    nodes_.clear();
    consumed_ = false;
    ++epoch_;
}

Tape* Tape::active() { return t_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(t_active_tape) {
    t_active_tape = &tape;
}

TapeScope::~TapeScope() { t_active_tape = previous_; }

}  // namespace hgad::ad
