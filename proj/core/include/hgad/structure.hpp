#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "hgad/ops.hpp"
#include "hgad/schema.hpp"
#include "hgad/series.hpp"

namespace hgad {

/// Learnable state of the graph structure stage: per-variable embeddings,
/// per-kind window projections, similarity weights and the threshold.
struct StructureParams {
    ad::TensorPtr embeddings;       // L x proj_dim, one row per variable
    ad::TensorPtr proj_weight_c;    // window x proj_dim
    ad::TensorPtr proj_bias_c;      // 1 x proj_dim
    ad::TensorPtr proj_weight_d;    // window x proj_dim
    ad::TensorPtr proj_bias_d;      // 1 x proj_dim
    ad::TensorPtr sim_weight_embed; // L x L elementwise weight on the embedding similarity
    ad::TensorPtr sim_weight_feat;  // L x L elementwise weight on the feature similarity
    ad::TensorPtr tau_raw;          // scalar; threshold tau = sigmoid(tau_raw)
};

/// Similarity matrices, thresholded adjacency, and the typed subgraph
/// adjacencies (canonical L x L indexing; zero outside each type block).
struct GraphBundle {
    ad::TensorPtr embed_sim;  // null when the embedding similarity is disabled
    ad::TensorPtr feat_sim;   // null when the feature similarity is disabled
    ad::TensorPtr agg_sim;
    ad::TensorPtr adjacency;  // binary values, straight-through gradient
    ad::TensorPtr soft_adjacency;  // sigmoid((agg - tau)/temperature), inspection only
    ad::TensorPtr adj_cc;     // continuous-continuous edges + their self-loops
    ad::TensorPtr adj_dd;     // discrete-discrete edges + their self-loops
    ad::TensorPtr adj_cross;  // cross-kind edges + self-loops for all nodes
};

/// Temperature of the straight-through sigmoid surrogate behind the hard
/// adjacency threshold.
constexpr double kThresholdTemperature = 0.1;

/// Project the L x window input block into the shared proj_dim space: each
/// row goes through its kind's affine map followed by SELU.
ad::TensorPtr project_features(const WindowSample& window, const StructureParams& params,
                               const VariableSchema& schema);

/// Pairwise cosine similarity of embedding rows. With strict=true a zero-norm
/// row raises a degenerate-embedding error (API boundary behaviour); the
/// training path uses strict=false and relies on the clamped denominator.
ad::TensorPtr embedding_similarity(const ad::TensorPtr& embeddings, bool strict = true);
ad::TensorPtr feature_similarity(const ad::TensorPtr& features, bool strict = true);

/// Elementwise-weighted sum of the two similarity matrices. Null inputs drop
/// the corresponding term (ablations); at least one must be present.
ad::TensorPtr aggregate_similarity(const ad::TensorPtr& embed_sim,
                                   const ad::TensorPtr& feat_sim,
                                   const StructureParams& params);

struct ThresholdResult {
    ad::TensorPtr adjacency;       // 1 where agg >= tau, self-loops forced
    ad::TensorPtr soft_adjacency;  // surrogate values, not on the tape
};

/// Hard thresholding of the aggregated similarity at tau = sigmoid(tau_raw),
/// straight-through gradients, self-loops forced on.
ThresholdResult threshold_adjacency(const ad::TensorPtr& agg_sim, const ad::TensorPtr& tau);

struct Subgraphs {
    ad::TensorPtr adj_cc;
    ad::TensorPtr adj_dd;
    ad::TensorPtr adj_cross;
};

/// Split the adjacency into same-kind and cross-kind subgraphs. Every retained
/// edge lands in exactly one subgraph; the cross subgraph additionally carries
/// self-loops for all nodes.
Subgraphs extract_subgraphs(const ad::TensorPtr& adjacency, const VariableSchema& schema);

/// Training-time edge dropout: every non-self-loop entry of each subgraph is
/// independently zeroed with probability p. Deterministic under the rng state.
void random_mask(GraphBundle& bundle, double p, std::mt19937_64& rng);

/// Write embed/feat/agg similarity matrices and the adjacency as CSV files
/// (variable-name headers) under `directory` with the given file prefix.
void export_graph(const GraphBundle& bundle, const VariableSchema& schema,
                  const std::string& directory, const std::string& prefix);

}  // namespace hgad
