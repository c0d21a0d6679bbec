// Test-only oracles, independent of the library's backward pass: central
// finite differences, scalar-loop cosine/attention references, and a
// brute-force threshold sweep.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hgad/tensor.hpp"

namespace oracles {

/// Central finite differences of a scalar function over one flat parameter
/// vector. `eval` must recompute the full forward pass from current values.
inline std::vector<double> finite_difference(std::vector<double>& theta,
                                             const std::function<double()>& eval,
                                             double step = 1e-5) {
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + step;
        const double hi = eval();
        theta[i] = saved - step;
        const double lo = eval();
        theta[i] = saved;
        grad[i] = (hi - lo) / (2.0 * step);
    }
    return grad;
}

/// Relative-error comparison that tolerates tiny magnitudes: both below
/// `floor` counts as a match.
inline double rel_err(double a, double b, double floor = 1e-7) {
    const double scale = std::max({std::fabs(a), std::fabs(b), floor});
    return std::fabs(a - b) / scale;
}

inline double max_grad_rel_err(const std::vector<double>& ad_grad,
                               const std::vector<double>& fd_grad) {
    double worst = 0.0;
    for (std::size_t i = 0; i < ad_grad.size(); ++i) {
        worst = std::max(worst, rel_err(ad_grad[i], fd_grad[i]));
    }
    return worst;
}

/// Plain scalar-loop cosine similarity matrix (no epsilon guard).
inline std::vector<double> cosine_oracle(const std::vector<double>& x, std::size_t rows,
                                         std::size_t cols) {
    std::vector<double> out(rows * rows);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < rows; ++j) {
            double dot = 0.0, ni = 0.0, nj = 0.0;
            for (std::size_t k = 0; k < cols; ++k) {
                dot += x[i * cols + k] * x[j * cols + k];
                ni += x[i * cols + k] * x[i * cols + k];
                nj += x[j * cols + k] * x[j * cols + k];
            }
            out[i * rows + j] = dot / (std::sqrt(ni) * std::sqrt(nj));
        }
    }
    return out;
}

struct GatOracleHead {
    std::vector<double> weight;  // proj_dim x out_dim (same layout as the model)
    std::vector<double> attn;    // 2*out_dim
};

/// Direct dense-loop multi-head graph attention: per head, score every
/// retained edge with attn^T [W f_i || W f_j], LeakyReLU, softmax over the
/// neighbourhood, aggregate, then mean over heads and SELU. Nodes without any
/// incidence yield zero rows.
inline std::vector<double> gat_oracle(const std::vector<double>& features, std::size_t L,
                                      std::size_t proj_dim,
                                      const std::vector<double>& adjacency,
                                      const std::vector<GatOracleHead>& heads,
                                      std::size_t out_dim, double slope = 0.2) {
    const double selu_lambda = 1.05070098, selu_alpha = 1.67326324;
    std::vector<double> accum(L * out_dim, 0.0);
    for (const auto& head : heads) {
        // z_i = W f_i with the model's (proj_dim x out_dim) layout.
        std::vector<double> z(L * out_dim, 0.0);
        for (std::size_t i = 0; i < L; ++i) {
            for (std::size_t k = 0; k < proj_dim; ++k) {
                for (std::size_t o = 0; o < out_dim; ++o) {
                    z[i * out_dim + o] += features[i * proj_dim + k] * head.weight[k * out_dim + o];
                }
            }
        }
        for (std::size_t i = 0; i < L; ++i) {
            std::vector<std::size_t> nbrs;
            for (std::size_t j = 0; j < L; ++j) {
                if (adjacency[i * L + j] > 0.5) nbrs.push_back(j);
            }
            if (nbrs.empty()) continue;
            std::vector<double> e(nbrs.size());
            for (std::size_t n = 0; n < nbrs.size(); ++n) {
                double s = 0.0;
                for (std::size_t o = 0; o < out_dim; ++o) {
                    s += head.attn[o] * z[i * out_dim + o];
                    s += head.attn[out_dim + o] * z[nbrs[n] * out_dim + o];
                }
                e[n] = s >= 0.0 ? s : slope * s;
            }
            double denom = 0.0;
            std::vector<double> alpha(nbrs.size());
            for (std::size_t n = 0; n < nbrs.size(); ++n) {
                alpha[n] = std::exp(e[n]);
                denom += alpha[n];
            }
            for (std::size_t n = 0; n < nbrs.size(); ++n) {
                const double a = alpha[n] / denom;
                for (std::size_t o = 0; o < out_dim; ++o) {
                    accum[i * out_dim + o] += a * z[nbrs[n] * out_dim + o];
                }
            }
        }
    }
    const double inv_h = 1.0 / static_cast<double>(heads.size());
    for (auto& v : accum) {
        const double m = v * inv_h;
        v = m > 0.0 ? selu_lambda * m : selu_lambda * selu_alpha * (std::exp(m) - 1.0);
    }
    return accum;
}

/// Best F1 over every unique score used as a strict threshold (plus a
/// flag-everything sentinel). Returns {f1, threshold}.
inline std::pair<double, double> sweep_oracle(const std::vector<double>& scores,
                                              const std::vector<int>& labels) {
    std::vector<double> candidates = scores;
    double min_v = scores[0];
    for (double s : scores) min_v = std::min(min_v, s);
    candidates.push_back(min_v - 1.0);
    double best_f1 = -1.0, best_thr = 0.0;
    for (double thr : candidates) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const bool flag = scores[i] > thr;
            if (flag && labels[i]) ++tp;
            else if (flag && !labels[i]) ++fp;
            else if (!flag && labels[i]) ++fn;
        }
        const double p = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
        const double r = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
        const double f1 = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_thr = thr;
        }
    }
    return {best_f1, best_thr};
}

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n,
                                         double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

}  // namespace oracles
