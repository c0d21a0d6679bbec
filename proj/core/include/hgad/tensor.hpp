#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hgad::ad {

class Tape;

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense row-major tensor of doubles participating in reverse-mode autodiff.
///
/// Values are always materialized; `grad` stays empty until a backward pass
/// (or ensure_grad) touches the tensor. Tensors created by ops while a Tape
/// is active remember their producing tape so stale-tape misuse is caught.
class Tensor {
public:
    Tensor(std::vector<std::size_t> shape, std::vector<double> values,
           bool requires_grad = false);

    static TensorPtr make(std::vector<std::size_t> shape, std::vector<double> values,
                          bool requires_grad = false);
    static TensorPtr zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static TensorPtr full(std::vector<std::size_t> shape, double fill,
                          bool requires_grad = false);
    static TensorPtr scalar(double v, bool requires_grad = false);
    /// 2-D convenience constructor from nested initializer data.
    static TensorPtr matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                            bool requires_grad = false);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return values.size(); }

    /// Rows/cols of a 2-D tensor (scalars and vectors are promoted: a length-n
    /// 1-D tensor reads as n x 1).
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    /// Fetch the single element of a scalar tensor.
    double value() const;

    void ensure_grad();
    void zero_grad();
    bool grad_ready() const { return !grad.empty(); }

    std::string shape_str() const;

    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    /// True when this tensor lies on a differentiable path from some leaf
    /// with requires_grad. Ops skip tape recording when no input needs grad.
    bool needs_grad = false;
    /// Tape that produced this tensor, null for leaves/constants.
    const Tape* producer = nullptr;
    /// Generation of the producing tape at creation time.
    std::uint64_t producer_epoch = 0;

private:
    std::vector<std::size_t> shape_;
};

/// Ordered record of executed ops. Define-by-run: ops executed while a
/// TapeScope is active append one backward closure each. Replaying the
/// closures in reverse order is a reverse topological traversal because
/// every op's inputs exist before the op runs.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::function<void()> backward_step);

    /// Seed d(loss)/d(loss)=1 and propagate to every reachable tensor.
    /// `loss` must be a scalar produced on this tape, and the tape must not
    /// have been consumed by a previous backward.
    void backward(const TensorPtr& loss);

    /// Drop all recorded closures (and with them the saved intermediates).
    void clear();

    std::size_t node_count() const { return nodes_.size(); }
    std::uint64_t epoch() const { return epoch_; }

    /// Tape currently recording on this thread, or nullptr.
    static Tape* active();

private:
    friend class TapeScope;
    std::vector<std::function<void()>> nodes_;
    bool consumed_ = false;
    std::uint64_t epoch_ = 0;
};

/// RAII guard making a tape the active recorder for the current thread.
/// Tapes are thread-confined; independent tapes may run on parallel threads.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

}  // namespace hgad::ad
