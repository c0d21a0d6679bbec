#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hgad/structure.hpp"

namespace hgad {

struct ModelDims {
    std::size_t window = 15;
    std::size_t proj_dim = 64;  // shared projection/embedding width
    std::size_t out_dim = 10;   // post-attention node width
    std::size_t heads = 4;

    void validate() const;
};

/// Component toggles: drop either similarity term from the aggregated graph,
/// or drop one of the three attention channels.
struct AblationFlags {
    bool disable_embed_sim = false;       // "NE": drop the embedding similarity
    bool disable_feat_sim = false;        // "NF": drop the feature similarity
    bool disable_discrete_channel = false;    // "DFS"
    bool disable_continuous_channel = false;  // "CFS"
    bool disable_hybrid_channel = false;      // "HFS": fuse with beta fixed at 1

    bool any() const;
    void validate() const;
    std::string summary() const;  // e.g. "NE,DFS" or "none"
    static AblationFlags parse(const std::string& csv);
};

/// One attention channel: H heads, each with a shared node-feature weight and
/// a scoring vector over the concatenated pair features.
struct GatChannelParams {
    struct Head {
        ad::TensorPtr weight;  // proj_dim x out_dim
        ad::TensorPtr attn;    // 2*out_dim x 1 (source half first, then target)
    };
    std::vector<Head> heads;
};

/// Channel blending and the shared prediction head.
struct FusionParams {
    ad::TensorPtr beta_raw;    // scalar; beta = sigmoid(beta_raw)
    ad::TensorPtr embed_proj;  // proj_dim x out_dim, reconciles embedding width
    ad::TensorPtr mlp_w1;      // out_dim x out_dim
    ad::TensorPtr mlp_b1;      // 1 x out_dim
    ad::TensorPtr mlp_w2;      // out_dim x 1
    ad::TensorPtr mlp_b2;      // 1 x 1
};

struct ModelParams {
    VariableSchema schema;
    ModelDims dims;
    AblationFlags ablation;
    StructureParams structure;
    GatChannelParams gat_continuous;
    GatChannelParams gat_discrete;
    GatChannelParams gat_hybrid;
    FusionParams fusion;

    static ModelParams init(const VariableSchema& schema, const ModelDims& dims,
                            const AblationFlags& ablation, std::mt19937_64& rng);

    /// All learnable tensors in a stable order (matches named_parameters).
    std::vector<ad::TensorPtr> parameters() const;
    std::vector<std::pair<std::string, ad::TensorPtr>> named_parameters() const;
    ModelParams clone() const;
};

constexpr double kAttentionLeakySlope = 0.2;

/// Multi-head graph attention on one subgraph (masked softmax over each
/// node's retained neighbours, head-mean, SELU). Nodes outside the subgraph
/// yield zero rows. Attention is gated by the adjacency values so the
/// straight-through threshold gradient reaches the structure parameters.
ad::TensorPtr gat_channel(const ad::TensorPtr& features, const ad::TensorPtr& adj_sub,
                          const GatChannelParams& params);

/// Reassemble the continuous/discrete channel rows into canonical node order
/// and blend with the hybrid channel: beta * assembled + (1-beta) * hybrid.
/// A null beta (hybrid channel disabled) returns the assembled rows alone.
ad::TensorPtr channel_aggregate(const ad::TensorPtr& h_continuous,
                                const ad::TensorPtr& h_discrete,
                                const ad::TensorPtr& h_hybrid, const ad::TensorPtr& beta,
                                const std::vector<std::size_t>& continuous_idx,
                                const std::vector<std::size_t>& discrete_idx,
                                std::size_t n_nodes);

/// Per-node prediction head: SELU(mlp(h + E * embed_proj)), shared weights.
ad::TensorPtr predict(const ad::TensorPtr& h, const ad::TensorPtr& embeddings,
                      const FusionParams& fusion);

enum class ForwardMode { Train, Eval };

struct ForwardOptions {
    ForwardMode mode = ForwardMode::Eval;
    double mask_p = 0.0;               // applied in Train mode only
    std::mt19937_64* mask_rng = nullptr;
    /// Replace the hard 0/1 adjacency values by the sigmoid surrogate itself
    /// (self-loops still exactly 1, mask structure still from the hard rule).
    /// This makes the whole model differentiable, which is what the
    /// finite-difference gradient suite checks end to end.
    bool soft_graph = false;
};

struct ForwardResult {
    ad::TensorPtr prediction;  // L x 1
    GraphBundle bundle;
};

/// Full pipeline for one window: projection, similarity graph, threshold,
/// typed subgraphs (masked when training), three attention channels,
/// aggregation, prediction.
ForwardResult forward(const ModelParams& params, const WindowSample& window,
                      const ForwardOptions& options = {});

}  // namespace hgad
