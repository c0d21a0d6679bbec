#include "hgad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hgad/error.hpp"

namespace hgad::ad {

namespace {

constexpr double kSeluLambda = 1.05070098;
constexpr double kSeluAlpha = 1.67326324;
constexpr double kCosineDenomFloor = 1e-12;

[[noreturn]] void shape_fail(const char* op, const TensorPtr& a, const TensorPtr& b) {
    std::ostringstream os;
    os << op << ": incompatible shapes " << a->shape_str() << " and " << b->shape_str();
    throw ShapeError(os.str());
}

void require_matrix(const char* op, const TensorPtr& x) {
    if (x->ndim() != 2) {
        throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + x->shape_str());
    }
}

/// Stamp provenance + record the backward closure if anything needs grad.
/// Outputs that never receive a gradient (dead branches) are skipped during
/// replay instead of dereferencing an unallocated grad buffer.
TensorPtr finish(TensorPtr out, bool needs, std::function<void()> backward_step) {
    Tape* tape = Tape::active();
    out->needs_grad = needs && tape != nullptr;
    if (out->needs_grad) {
        out->producer = tape;
        out->producer_epoch = tape->epoch();
        tape->record([out, step = std::move(backward_step)] {
            if (!out->grad.empty()) step();
        });
    } else if (tape != nullptr) {
        // Even grad-free results are stamped so scalar losses built from
        // constants still pass the stale-tape check.
        out->producer = tape;
        out->producer_epoch = tape->epoch();
    }
    return out;
}

bool same_shape(const TensorPtr& a, const TensorPtr& b) {
    return a->shape() == b->shape();
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    if (!same_shape(a, b)) shape_fail("add", a, b);
    std::vector<double> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->values[i] + b->values[i];
    auto out = Tensor::make(a->shape(), std::move(v));
    bool needs = a->needs_grad || b->needs_grad;
    return finish(out, needs, [a, b, out] {
        if (a->needs_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
        }
        if (b->needs_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
        }
    });
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    if (!same_shape(a, b)) shape_fail("sub", a, b);
    std::vector<double> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->values[i] - b->values[i];
    auto out = Tensor::make(a->shape(), std::move(v));
    bool needs = a->needs_grad || b->needs_grad;
    return finish(out, needs, [a, b, out] {
        if (a->needs_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
        }
        if (b->needs_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] -= out->grad[i];
        }
    });
}

TensorPtr hadamard(const TensorPtr& a, const TensorPtr& b) {
    if (!same_shape(a, b)) shape_fail("hadamard", a, b);
    std::vector<double> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->values[i] * b->values[i];
    auto out = Tensor::make(a->shape(), std::move(v));
    bool needs = a->needs_grad || b->needs_grad;
    return finish(out, needs, [a, b, out] {
        if (a->needs_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i)
                a->grad[i] += out->grad[i] * b->values[i];
        }
        if (b->needs_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i)
                b->grad[i] += out->grad[i] * a->values[i];
        }
    });
}

TensorPtr add_const(const TensorPtr& x, double c) {
    std::vector<double> v(x->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x->values[i] + c;
    auto out = Tensor::make(x->shape(), std::move(v));
    return finish(out, x->needs_grad, [x, out] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
    });
}

TensorPtr scale_const(const TensorPtr& x, double c) {
    std::vector<double> v(x->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x->values[i] * c;
    auto out = Tensor::make(x->shape(), std::move(v));
    return finish(out, x->needs_grad, [x, out, c] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += c * out->grad[i];
    });
}

TensorPtr scale_by_scalar(const TensorPtr& x, const TensorPtr& s) {
    if (s->size() != 1) {
        throw ShapeError("scale_by_scalar: scale must be scalar, got " + s->shape_str());
    }
    const double sv = s->values[0];
    std::vector<double> v(x->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x->values[i] * sv;
    auto out = Tensor::make(x->shape(), std::move(v));
    bool needs = x->needs_grad || s->needs_grad;
    return finish(out, needs, [x, s, out, sv] {
        if (x->needs_grad) {
            x->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i)
                x->grad[i] += sv * out->grad[i];
        }
        if (s->needs_grad) {
            s->ensure_grad();
            double acc = 0.0;
            for (std::size_t i = 0; i < out->grad.size(); ++i)
                acc += out->grad[i] * x->values[i];
            s->grad[0] += acc;
        }
    });
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    require_matrix("matmul", a);
    require_matrix("matmul", b);
    const std::size_t m = a->rows(), k = a->cols(), k2 = b->rows(), n = b->cols();
    if (k != k2) shape_fail("matmul", a, b);
    std::vector<double> v(m * n, 0.0);
    // ikj order keeps the inner loop contiguous in both b and the output.
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a->values[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = b->values.data() + p * n;
            double* orow = v.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    auto out = Tensor::make({m, n}, std::move(v));
    bool needs = a->needs_grad || b->needs_grad;
    return finish(out, needs, [a, b, out, m, k, n] {
        if (a->needs_grad) {
            a->ensure_grad();
            // dA = G * B^T
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* grow = out->grad.data() + i * n;
                    const double* brow = b->values.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    a->grad[i * k + p] += acc;
                }
            }
        }
        if (b->needs_grad) {
            b->ensure_grad();
            // dB = A^T * G
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = out->grad.data() + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = a->values[i * k + p];
                    if (aip == 0.0) continue;
                    double* brow = b->grad.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
                }
            }
        }
    });
}

TensorPtr selu(const TensorPtr& x) {
    std::vector<double> v(x->size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double xv = x->values[i];
        v[i] = xv > 0.0 ? kSeluLambda * xv : kSeluLambda * kSeluAlpha * (std::exp(xv) - 1.0);
    }
    auto out = Tensor::make(x->shape(), std::move(v));
    return finish(out, x->needs_grad, [x, out] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) {
            const double d = x->values[i] > 0.0
                                 ? kSeluLambda
                                 : out->values[i] + kSeluLambda * kSeluAlpha;
            x->grad[i] += d * out->grad[i];
        }
    });
}

TensorPtr leaky_relu(const TensorPtr& x, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) {
        throw ConfigError("leaky_relu: slope must lie in (0,1)");
    }
    std::vector<double> v(x->size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double xv = x->values[i];
        v[i] = xv >= 0.0 ? xv : slope * xv;
    }
    auto out = Tensor::make(x->shape(), std::move(v));
    return finish(out, x->needs_grad, [x, out, slope] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) {
            x->grad[i] += (x->values[i] >= 0.0 ? 1.0 : slope) * out->grad[i];
        }
    });
}

TensorPtr sigmoid(const TensorPtr& x) {
    std::vector<double> v(x->size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double xv = x->values[i];
        // Split on sign to avoid overflow in exp.
        v[i] = xv >= 0.0 ? 1.0 / (1.0 + std::exp(-xv))
                         : std::exp(xv) / (1.0 + std::exp(xv));
    }
    auto out = Tensor::make(x->shape(), std::move(v));
    return finish(out, x->needs_grad, [x, out] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) {
            const double y = out->values[i];
            x->grad[i] += y * (1.0 - y) * out->grad[i];
        }
    });
}

TensorPtr abs_val(const TensorPtr& x) {
    std::vector<double> v(x->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::fabs(x->values[i]);
    auto out = Tensor::make(x->shape(), std::move(v));
    return finish(out, x->needs_grad, [x, out] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i) {
            const double xv = x->values[i];
            const double s = xv > 0.0 ? 1.0 : (xv < 0.0 ? -1.0 : 0.0);
            x->grad[i] += s * out->grad[i];
        }
    });
}

TensorPtr softmax_rows(const TensorPtr& x, const Mask* mask) {
    require_matrix("softmax_rows", x);
    const std::size_t m = x->rows(), n = x->cols();
    if (mask && mask->size() != m * n) {
        throw ShapeError("softmax_rows: mask size does not match tensor " + x->shape_str());
    }
    auto unmasked = [&](std::size_t i, std::size_t j) {
        return !mask || (*mask)[i * n + j] != 0;
    };
    std::vector<double> v(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (unmasked(i, j)) row_max = std::max(row_max, x->values[i * n + j]);
        }
        if (row_max == -std::numeric_limits<double>::infinity()) {
            throw DataError("softmax_rows: row " + std::to_string(i) + " is fully masked");
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!unmasked(i, j)) continue;
            const double e = std::exp(x->values[i * n + j] - row_max);
            v[i * n + j] = e;
            denom += e;
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (unmasked(i, j)) v[i * n + j] /= denom;
        }
    }
    auto out = Tensor::make(x->shape(), std::move(v));
    std::shared_ptr<Mask> mask_copy = mask ? std::make_shared<Mask>(*mask) : nullptr;
    return finish(out, x->needs_grad, [x, out, mask_copy, m, n] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        auto live = [&](std::size_t i, std::size_t j) {
            return !mask_copy || (*mask_copy)[i * n + j] != 0;
        };
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (live(i, j)) dot += out->grad[i * n + j] * out->values[i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (!live(i, j)) continue;
                const double y = out->values[i * n + j];
                x->grad[i * n + j] += y * (out->grad[i * n + j] - dot);
            }
        }
    });
}

TensorPtr sum_all(const TensorPtr& x) {
    double acc = 0.0;
    for (double v : x->values) acc += v;
    auto out = Tensor::scalar(acc);
    return finish(out, x->needs_grad, [x, out] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        const double g = out->grad[0];
        for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
    });
}

TensorPtr mean_all(const TensorPtr& x) {
    if (x->size() == 0) throw ShapeError("mean_all: empty tensor");
    double acc = 0.0;
    for (double v : x->values) acc += v;
    const double inv = 1.0 / static_cast<double>(x->size());
    auto out = Tensor::scalar(acc * inv);
    return finish(out, x->needs_grad, [x, out, inv] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        const double g = out->grad[0] * inv;
        for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
    });
}

TensorPtr mse_loss(const TensorPtr& pred, const TensorPtr& target) {
    if (!same_shape(pred, target)) shape_fail("mse_loss", pred, target);
    if (pred->size() == 0) throw ShapeError("mse_loss: empty tensors");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred->size(); ++i) {
        const double d = pred->values[i] - target->values[i];
        acc += d * d;
    }
    const double inv = 1.0 / static_cast<double>(pred->size());
    auto out = Tensor::scalar(acc * inv);
    bool needs = pred->needs_grad || target->needs_grad;
    return finish(out, needs, [pred, target, out, inv] {
        const double g = out->grad[0];
        if (pred->needs_grad) {
            pred->ensure_grad();
            for (std::size_t i = 0; i < pred->size(); ++i) {
                pred->grad[i] += 2.0 * (pred->values[i] - target->values[i]) * inv * g;
            }
        }
        if (target->needs_grad) {
            target->ensure_grad();
            for (std::size_t i = 0; i < target->size(); ++i) {
                target->grad[i] -= 2.0 * (pred->values[i] - target->values[i]) * inv * g;
            }
        }
    });
}

TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no tensors given");
    const std::size_t n = parts[0]->cols();
    std::size_t total = 0;
    bool needs = false;
    for (const auto& p : parts) {
        require_matrix("concat_rows", p);
        if (p->cols() != n) shape_fail("concat_rows", parts[0], p);
        total += p->rows();
        needs = needs || p->needs_grad;
    }
    std::vector<double> v;
    v.reserve(total * n);
    for (const auto& p : parts) v.insert(v.end(), p->values.begin(), p->values.end());
    auto out = Tensor::make({total, n}, std::move(v));
    return finish(out, needs, [parts, out, n] {
        std::size_t offset = 0;
        for (const auto& p : parts) {
            const std::size_t count = p->size();
            if (p->needs_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < count; ++i) p->grad[i] += out->grad[offset + i];
            }
            offset += count;
        }
    });
}

TensorPtr slice_rows(const TensorPtr& x, std::size_t start, std::size_t count) {
    require_matrix("slice_rows", x);
    const std::size_t n = x->cols();
    if (start + count > x->rows()) {
        throw ShapeError("slice_rows: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") exceeds " + x->shape_str());
    }
    std::vector<double> v(x->values.begin() + start * n,
                          x->values.begin() + (start + count) * n);
    auto out = Tensor::make({count, n}, std::move(v));
    return finish(out, x->needs_grad, [x, out, start, n] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) x->grad[start * n + i] += out->grad[i];
    });
}

TensorPtr gather_rows(const TensorPtr& x, const std::vector<std::size_t>& indices) {
    require_matrix("gather_rows", x);
    const std::size_t n = x->cols();
    std::vector<double> v(indices.size() * n);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= x->rows()) {
            throw ShapeError("gather_rows: index " + std::to_string(indices[k]) +
                             " out of range for " + x->shape_str());
        }
        std::copy_n(x->values.begin() + indices[k] * n, n, v.begin() + k * n);
    }
    auto out = Tensor::make({indices.size(), n}, std::move(v));
    auto idx = indices;
    return finish(out, x->needs_grad, [x, out, idx, n] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        for (std::size_t k = 0; k < idx.size(); ++k) {
            for (std::size_t j = 0; j < n; ++j) {
                x->grad[idx[k] * n + j] += out->grad[k * n + j];
            }
        }
    });
}

TensorPtr scatter_rows(const TensorPtr& x, const std::vector<std::size_t>& indices,
                       std::size_t total_rows) {
    require_matrix("scatter_rows", x);
    if (indices.size() != x->rows()) {
        throw ShapeError("scatter_rows: got " + std::to_string(indices.size()) +
                         " indices for " + x->shape_str());
    }
    const std::size_t n = x->cols();
    std::vector<double> v(total_rows * n, 0.0);
    std::vector<std::uint8_t> seen(total_rows, 0);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t r = indices[k];
        if (r >= total_rows) {
            throw ShapeError("scatter_rows: index " + std::to_string(r) +
                             " out of range for " + std::to_string(total_rows) + " rows");
        }
        if (seen[r]) throw ShapeError("scatter_rows: duplicate row index " + std::to_string(r));
        seen[r] = 1;
        std::copy_n(x->values.begin() + k * n, n, v.begin() + r * n);
    }
    auto out = Tensor::make({total_rows, n}, std::move(v));
    auto idx = indices;
    return finish(out, x->needs_grad, [x, out, idx, n] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        for (std::size_t k = 0; k < idx.size(); ++k) {
            for (std::size_t j = 0; j < n; ++j) {
                x->grad[k * n + j] += out->grad[idx[k] * n + j];
            }
        }
    });
}

TensorPtr add_rowvec(const TensorPtr& x, const TensorPtr& row) {
    require_matrix("add_rowvec", x);
    const std::size_t m = x->rows(), n = x->cols();
    if (row->size() != n) shape_fail("add_rowvec", x, row);
    std::vector<double> v(x->size());
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            v[i * n + j] = x->values[i * n + j] + row->values[j];
        }
    }
    auto out = Tensor::make(x->shape(), std::move(v));
    bool needs = x->needs_grad || row->needs_grad;
    return finish(out, needs, [x, row, out, m, n] {
        if (x->needs_grad) {
            x->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
        }
        if (row->needs_grad) {
            row->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) row->grad[j] += out->grad[i * n + j];
            }
        }
    });
}

TensorPtr outer_sum(const TensorPtr& u, const TensorPtr& v) {
    if (u->cols() != 1 || v->cols() != 1) {
        throw ShapeError("outer_sum: expected column vectors, got " + u->shape_str() +
                         " and " + v->shape_str());
    }
    const std::size_t m = u->rows(), n = v->rows();
    std::vector<double> vals(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) vals[i * n + j] = u->values[i] + v->values[j];
    }
    auto out = Tensor::make({m, n}, std::move(vals));
    bool needs = u->needs_grad || v->needs_grad;
    return finish(out, needs, [u, v, out, m, n] {
        if (u->needs_grad) {
            u->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += out->grad[i * n + j];
                u->grad[i] += acc;
            }
        }
        if (v->needs_grad) {
            v->ensure_grad();
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < m; ++i) acc += out->grad[i * n + j];
                v->grad[j] += acc;
            }
        }
    });
}

TensorPtr scale_rows(const TensorPtr& x, const std::vector<double>& coeffs) {
    require_matrix("scale_rows", x);
    const std::size_t m = x->rows(), n = x->cols();
    if (coeffs.size() != m) {
        throw ShapeError("scale_rows: got " + std::to_string(coeffs.size()) +
                         " coefficients for " + x->shape_str());
    }
    std::vector<double> v(x->size());
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] = coeffs[i] * x->values[i * n + j];
    }
    auto out = Tensor::make(x->shape(), std::move(v));
    auto c = coeffs;
    return finish(out, x->needs_grad, [x, out, c, m, n] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                x->grad[i * n + j] += c[i] * out->grad[i * n + j];
            }
        }
    });
}

TensorPtr cosine_matrix(const TensorPtr& x) {
    require_matrix("cosine_matrix", x);
    const std::size_t m = x->rows(), d = x->cols();
    std::vector<double> norms(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = x->values[i * d + j];
            acc += v * v;
        }
        norms[i] = std::sqrt(acc);
    }
    std::vector<double> v(m * m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                dot += x->values[i * d + k] * x->values[j * d + k];
            }
            const double denom = std::max(norms[i] * norms[j], kCosineDenomFloor);
            const double c = dot / denom;
            v[i * m + j] = c;
            v[j * m + i] = c;
        }
    }
    auto out = Tensor::make({m, m}, std::move(v));
    return finish(out, x->needs_grad, [x, out, norms, m, d] {
        if (!x->needs_grad) return;
        x->ensure_grad();
        // Each entry C_ij depends on both arguments:
        // dC_ij/dx_i = x_j/(n_i n_j) - C_ij x_i / n_i^2 and symmetrically for x_j.
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j) continue;  // diagonal is constant 1
                const double g = out->grad[i * m + j];
                if (g == 0.0) continue;
                const double denom = std::max(norms[i] * norms[j], kCosineDenomFloor);
                if (denom <= kCosineDenomFloor) continue;  // degenerate row, no gradient
                const double cij = out->values[i * m + j];
                const double inv_ni2 = 1.0 / (norms[i] * norms[i]);
                const double inv_nj2 = 1.0 / (norms[j] * norms[j]);
                for (std::size_t k = 0; k < d; ++k) {
                    x->grad[i * d + k] +=
                        g * (x->values[j * d + k] / denom - cij * x->values[i * d + k] * inv_ni2);
                    x->grad[j * d + k] +=
                        g * (x->values[i * d + k] / denom - cij * x->values[j * d + k] * inv_nj2);
                }
            }
        }
    });
}

TensorPtr hard_threshold_st(const TensorPtr& m, const TensorPtr& tau, double temperature,
                            bool force_self_loops) {
    require_matrix("hard_threshold_st", m);
    if (tau->size() != 1) {
        throw ShapeError("hard_threshold_st: tau must be scalar, got " + tau->shape_str());
    }
    if (force_self_loops && m->rows() != m->cols()) {
        throw ShapeError("hard_threshold_st: self-loops need a square matrix, got " +
                         m->shape_str());
    }
    if (!(temperature > 0.0)) {
        throw ConfigError("hard_threshold_st: temperature must be positive");
    }
    const double tv = tau->values[0];
    const std::size_t rows = m->rows(), cols = m->cols();
    std::vector<double> v(m->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = m->values[i] >= tv ? 1.0 : 0.0;
    if (force_self_loops) {
        for (std::size_t i = 0; i < rows; ++i) v[i * cols + i] = 1.0;
    }
    auto out = Tensor::make(m->shape(), std::move(v));
    bool needs = m->needs_grad || tau->needs_grad;
    return finish(out, needs, [m, tau, out, tv, temperature, force_self_loops, rows, cols] {
        double tau_acc = 0.0;
        if (m->needs_grad) m->ensure_grad();
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
                if (force_self_loops && i == j) continue;  // forced entries: no gradient
                const std::size_t idx = i * cols + j;
                const double g = out->grad[idx];
                if (g == 0.0) continue;
                const double z = (m->values[idx] - tv) / temperature;
                const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                          : std::exp(z) / (1.0 + std::exp(z));
                const double w = s * (1.0 - s) / temperature;
                if (m->needs_grad) m->grad[idx] += g * w;
                tau_acc -= g * w;
            }
        }
        if (tau->needs_grad) {
            tau->ensure_grad();
            tau->grad[0] += tau_acc;
        }
    });
}

}  // namespace hgad::ad
