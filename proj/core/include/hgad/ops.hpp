#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hgad/tensor.hpp"

namespace hgad::ad {

/// Row-major boolean mask paired with softmax_rows. True = entry participates.
using Mask = std::vector<std::uint8_t>;

// Elementwise / structural ops. Every op validates shapes, computes the
// forward values, and (when an active tape exists and an input needs grad)
// records one backward closure.

TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr hadamard(const TensorPtr& a, const TensorPtr& b);
TensorPtr add_const(const TensorPtr& x, double c);
TensorPtr scale_const(const TensorPtr& x, double c);
/// Multiply every element of x by a scalar tensor (gradient reaches both).
TensorPtr scale_by_scalar(const TensorPtr& x, const TensorPtr& s);

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);

TensorPtr selu(const TensorPtr& x);
TensorPtr leaky_relu(const TensorPtr& x, double slope);
TensorPtr sigmoid(const TensorPtr& x);
TensorPtr abs_val(const TensorPtr& x);

/// Per-row exp-normalization of a 2-D tensor, numerically stabilized by the
/// row max over unmasked entries. Masked entries are exactly zero. A row with
/// no unmasked entry is a degenerate-row error.
TensorPtr softmax_rows(const TensorPtr& x, const Mask* mask = nullptr);

TensorPtr sum_all(const TensorPtr& x);
TensorPtr mean_all(const TensorPtr& x);
TensorPtr mse_loss(const TensorPtr& pred, const TensorPtr& target);

/// Stack 2-D tensors with equal column counts along the row (node) axis.
TensorPtr concat_rows(const std::vector<TensorPtr>& parts);
/// Rows [start, start+count) as a new tensor.
TensorPtr slice_rows(const TensorPtr& x, std::size_t start, std::size_t count);
/// Select rows by index (duplicates allowed).
TensorPtr gather_rows(const TensorPtr& x, const std::vector<std::size_t>& indices);
/// Place row k of x at row indices[k] of a total_rows x cols zero tensor.
/// Indices must be unique and in range.
TensorPtr scatter_rows(const TensorPtr& x, const std::vector<std::size_t>& indices,
                       std::size_t total_rows);

/// Add a 1 x n row vector to every row of an m x n tensor.
TensorPtr add_rowvec(const TensorPtr& x, const TensorPtr& row);
/// out[i][j] = u[i] + v[j] for column vectors u (m x 1) and v (n x 1).
TensorPtr outer_sum(const TensorPtr& u, const TensorPtr& v);
/// Multiply row i of x by the constant coefficient coeffs[i].
TensorPtr scale_rows(const TensorPtr& x, const std::vector<double>& coeffs);

/// Pairwise cosine similarity of the rows of an L x d tensor. Denominators
/// are clamped at 1e-12 so zero rows yield 0 instead of NaN; for non-degenerate
/// rows the result is the exact cosine.
TensorPtr cosine_matrix(const TensorPtr& x);

/// Hard threshold with a straight-through surrogate: forward emits the binary
/// matrix 1{m >= tau} (optionally forcing the diagonal to 1); backward routes
/// gradients through d/dm sigmoid((m - tau)/temperature), with d/dtau the
/// negative of the same. Forced diagonal entries carry no gradient.
TensorPtr hard_threshold_st(const TensorPtr& m, const TensorPtr& tau, double temperature,
                            bool force_self_loops);

}  // namespace hgad::ad
