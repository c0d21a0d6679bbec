#include "hgad/structure.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hgad/error.hpp"

namespace hgad {

using ad::Tensor;
using ad::TensorPtr;

ad::TensorPtr project_features(const WindowSample& window, const StructureParams& params,
                               const VariableSchema& schema) {
    const std::size_t L = schema.size();
    const std::size_t omega = window.window;
    if (window.n_vars != L) {
        throw ShapeError("window has " + std::to_string(window.n_vars) +
                         " variables, schema has " + std::to_string(L));
    }
    if (params.proj_weight_c->rows() != omega) {
        throw ShapeError("projection expects window length " +
                         std::to_string(params.proj_weight_c->rows()) + ", got " +
                         std::to_string(omega));
    }
    auto input = Tensor::make({L, omega}, window.input);
    const std::size_t proj_dim = params.proj_weight_c->cols();

    TensorPtr assembled;
    for (VariableKind kind : {VariableKind::Continuous, VariableKind::Discrete}) {
        const auto idx = schema.indices_of(kind);
        if (idx.empty()) continue;
        const bool cont = kind == VariableKind::Continuous;
        auto rows = ad::gather_rows(input, idx);
        auto projected = ad::selu(ad::add_rowvec(
            ad::matmul(rows, cont ? params.proj_weight_c : params.proj_weight_d),
            cont ? params.proj_bias_c : params.proj_bias_d));
        auto placed = ad::scatter_rows(projected, idx, L);
        assembled = assembled ? ad::add(assembled, placed) : placed;
    }
    if (!assembled) assembled = Tensor::zeros({L, proj_dim});
    return assembled;
}

namespace {

void check_no_zero_rows(const TensorPtr& x, const char* what) {
    const std::size_t m = x->rows(), d = x->cols();
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = x->values[i * d + j];
            acc += v * v;
        }
        if (acc == 0.0) {
            throw DataError(std::string("degenerate ") + what + ": row " +
                            std::to_string(i) + " has zero norm");
        }
    }
}

}  // namespace

ad::TensorPtr embedding_similarity(const ad::TensorPtr& embeddings, bool strict) {
    if (strict) check_no_zero_rows(embeddings, "embedding");
    return ad::cosine_matrix(embeddings);
}

ad::TensorPtr feature_similarity(const ad::TensorPtr& features, bool strict) {
    if (strict) check_no_zero_rows(features, "feature row");
    return ad::cosine_matrix(features);
}

ad::TensorPtr aggregate_similarity(const ad::TensorPtr& embed_sim,
                                   const ad::TensorPtr& feat_sim,
                                   const StructureParams& params) {
    TensorPtr acc;
    if (embed_sim) acc = ad::hadamard(embed_sim, params.sim_weight_embed);
    if (feat_sim) {
        auto term = ad::hadamard(feat_sim, params.sim_weight_feat);
        acc = acc ? ad::add(acc, term) : term;
    }
    if (!acc) throw ConfigError("aggregate_similarity: both similarity terms disabled");
    return acc;
}

ThresholdResult threshold_adjacency(const ad::TensorPtr& agg_sim, const ad::TensorPtr& tau) {
    const double tau_v = tau->value();
    if (!(tau_v >= 0.0 && tau_v <= 1.0)) {
        throw ConfigError("threshold tau must lie in (0,1), got " + std::to_string(tau_v));
    }
    // A saturated sigmoid can land exactly on 0 or 1 in floating point; treat
    // it as the open-interval limit rather than dying mid-training.
    ThresholdResult out;
    out.adjacency = ad::hard_threshold_st(agg_sim, tau, kThresholdTemperature,
                                          /*force_self_loops=*/true);
    // Surrogate values for inspection/export; kept off the tape.
    const std::size_t n = agg_sim->size();
    std::vector<double> soft(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = (agg_sim->values[i] - tau_v) / kThresholdTemperature;
        soft[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }
    out.soft_adjacency = Tensor::make(agg_sim->shape(), std::move(soft));
    return out;
}

Subgraphs extract_subgraphs(const ad::TensorPtr& adjacency, const VariableSchema& schema) {
    const std::size_t L = schema.size();
    if (adjacency->rows() != L || adjacency->cols() != L) {
        throw ShapeError("adjacency shape " + adjacency->shape_str() + " does not match " +
                         std::to_string(L) + " schema variables");
    }
    std::vector<double> mask_cc(L * L, 0.0), mask_dd(L * L, 0.0), mask_cross(L * L, 0.0);
    std::vector<double> eye(L * L, 0.0);
    for (std::size_t i = 0; i < L; ++i) {
        eye[i * L + i] = 1.0;
        for (std::size_t j = 0; j < L; ++j) {
            const bool ic = schema[i].kind == VariableKind::Continuous;
            const bool jc = schema[j].kind == VariableKind::Continuous;
            if (ic && jc) mask_cc[i * L + j] = 1.0;
            else if (!ic && !jc) mask_dd[i * L + j] = 1.0;
            else mask_cross[i * L + j] = 1.0;
        }
    }
    Subgraphs out;
    out.adj_cc = ad::hadamard(adjacency, Tensor::make({L, L}, std::move(mask_cc)));
    out.adj_dd = ad::hadamard(adjacency, Tensor::make({L, L}, std::move(mask_dd)));
    // Cross-kind edges plus a self-loop for every node so the hybrid channel
    // covers the whole graph.
    out.adj_cross = ad::add(ad::hadamard(adjacency, Tensor::make({L, L}, std::move(mask_cross))),
                            Tensor::make({L, L}, std::move(eye)));
    return out;
}

void random_mask(GraphBundle& bundle, double p, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError("mask probability must lie in [0,1), got " + std::to_string(p));
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto apply = [&](TensorPtr& adj) {
        if (!adj) return;
        const std::size_t L = adj->rows();
        std::vector<double> keep(L * L, 1.0);
        // Draw for every off-diagonal slot (edge or not) so the stream of rng
        // draws does not depend on the learned adjacency.
        for (std::size_t i = 0; i < L; ++i) {
            for (std::size_t j = 0; j < L; ++j) {
                if (i != j && unit(rng) < p) keep[i * L + j] = 0.0;
            }
        }
        adj = ad::hadamard(adj, Tensor::make({L, L}, std::move(keep)));
    };
    if (p == 0.0) return;
    apply(bundle.adj_cc);
    apply(bundle.adj_dd);
    apply(bundle.adj_cross);
}

namespace {

void write_matrix_csv(const std::string& path, const ad::TensorPtr& m,
                      const VariableSchema& schema) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write graph export: " + path);
    const std::size_t L = schema.size();
    out << "variable";
    for (std::size_t j = 0; j < L; ++j) out << "," << schema[j].name;
    out << "\n";
    char buf[40];
    for (std::size_t i = 0; i < L; ++i) {
        out << schema[i].name;
        for (std::size_t j = 0; j < L; ++j) {
            std::snprintf(buf, sizeof(buf), "%.12g", m->values[i * L + j]);
            out << "," << buf;
        }
        out << "\n";
    }
}

}  // namespace

void export_graph(const GraphBundle& bundle, const VariableSchema& schema,
                  const std::string& directory, const std::string& prefix) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    auto path = [&](const char* name) {
        return (std::filesystem::path(directory) / (prefix + name)).string();
    };
    if (bundle.embed_sim) write_matrix_csv(path("embedding_similarity.csv"), bundle.embed_sim, schema);
    if (bundle.feat_sim) write_matrix_csv(path("feature_similarity.csv"), bundle.feat_sim, schema);
    if (bundle.agg_sim) write_matrix_csv(path("aggregated_similarity.csv"), bundle.agg_sim, schema);
    if (bundle.adjacency) write_matrix_csv(path("adjacency.csv"), bundle.adjacency, schema);
}

}  // namespace hgad
