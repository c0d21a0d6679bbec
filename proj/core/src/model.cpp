#include "hgad/model.hpp"

#include <sstream>

#include "hgad/error.hpp"

namespace hgad {

using ad::Tensor;
using ad::TensorPtr;

void ModelDims::validate() const {
    if (window == 0 || proj_dim == 0 || out_dim == 0 || heads == 0) {
        throw ConfigError("model dimensions must all be positive");
    }
}

bool AblationFlags::any() const {
    return disable_embed_sim || disable_feat_sim || disable_discrete_channel ||
           disable_continuous_channel || disable_hybrid_channel;
}

void AblationFlags::validate() const {
    if (disable_embed_sim && disable_feat_sim) {
        throw ConfigError("cannot disable both similarity terms: the graph would be empty");
    }
    if (disable_discrete_channel && disable_continuous_channel && disable_hybrid_channel) {
        throw ConfigError("cannot disable all three attention channels");
    }
}

std::string AblationFlags::summary() const {
    std::ostringstream os;
    auto append = [&](bool on, const char* tag) {
        if (!on) return;
        if (os.tellp() > 0) os << ",";
        os << tag;
    };
    append(disable_embed_sim, "NE");
    append(disable_feat_sim, "NF");
    append(disable_discrete_channel, "DFS");
    append(disable_continuous_channel, "CFS");
    append(disable_hybrid_channel, "HFS");
    std::string s = os.str();
    return s.empty() ? "none" : s;
}

AblationFlags AblationFlags::parse(const std::string& csv) {
    AblationFlags flags;
    std::string token;
    std::istringstream in(csv);
    while (std::getline(in, token, ',')) {
        while (!token.empty() && (token.front() == ' ' || token.front() == '-'))
            token.erase(token.begin());
        while (!token.empty() && token.back() == ' ') token.pop_back();
        if (token.empty() || token == "none") continue;
        if (token == "NE") flags.disable_embed_sim = true;
        else if (token == "NF") flags.disable_feat_sim = true;
        else if (token == "DFS") flags.disable_discrete_channel = true;
        else if (token == "CFS") flags.disable_continuous_channel = true;
        else if (token == "HFS") flags.disable_hybrid_channel = true;
        else throw ConfigError("unknown ablation toggle '" + token +
                               "' (expected NE, NF, DFS, CFS or HFS)");
    }
    flags.validate();
    return flags;
}

namespace {

TensorPtr normal_tensor(std::vector<std::size_t> shape, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return Tensor::make(std::move(shape), std::move(v), /*requires_grad=*/true);
}

GatChannelParams init_gat(const ModelDims& dims, std::mt19937_64& rng) {
    GatChannelParams gat;
    const double w_std = 1.0 / std::sqrt(static_cast<double>(dims.proj_dim));
    const double a_std = 1.0 / std::sqrt(static_cast<double>(dims.out_dim));
    for (std::size_t h = 0; h < dims.heads; ++h) {
        GatChannelParams::Head head;
        head.weight = normal_tensor({dims.proj_dim, dims.out_dim}, w_std, rng);
        head.attn = normal_tensor({2 * dims.out_dim, 1}, a_std, rng);
        gat.heads.push_back(std::move(head));
    }
    return gat;
}

}  // namespace

ModelParams ModelParams::init(const VariableSchema& schema, const ModelDims& dims,
                              const AblationFlags& ablation, std::mt19937_64& rng) {
    schema.validate();
    dims.validate();
    ablation.validate();
    const std::size_t L = schema.size();

    ModelParams p;
    p.schema = schema;
    p.dims = dims;
    p.ablation = ablation;

    p.structure.embeddings = normal_tensor({L, dims.proj_dim}, 0.1, rng);
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(dims.window));
    p.structure.proj_weight_c = normal_tensor({dims.window, dims.proj_dim}, proj_std, rng);
    // Small nonzero biases keep all-zero windows (a flat discrete channel is
    // common) away from the zero feature row, where the cosine guard makes
    // the similarity graph discontinuous in the parameters.
    p.structure.proj_bias_c = normal_tensor({1, dims.proj_dim}, 0.01, rng);
    p.structure.proj_weight_d = normal_tensor({dims.window, dims.proj_dim}, proj_std, rng);
    p.structure.proj_bias_d = normal_tensor({1, dims.proj_dim}, 0.01, rng);
    // Start from the plain unweighted sum of the two similarity terms.
    p.structure.sim_weight_embed = Tensor::full({L, L}, 1.0, true);
    p.structure.sim_weight_feat = Tensor::full({L, L}, 1.0, true);
    p.structure.tau_raw = Tensor::scalar(0.0, true);  // tau starts at 0.5

    p.gat_continuous = init_gat(dims, rng);
    p.gat_discrete = init_gat(dims, rng);
    p.gat_hybrid = init_gat(dims, rng);

    p.fusion.beta_raw = Tensor::scalar(0.0, true);  // beta starts at 0.5
    const double e_std = 1.0 / std::sqrt(static_cast<double>(dims.proj_dim));
    const double m_std = 1.0 / std::sqrt(static_cast<double>(dims.out_dim));
    p.fusion.embed_proj = normal_tensor({dims.proj_dim, dims.out_dim}, e_std, rng);
    p.fusion.mlp_w1 = normal_tensor({dims.out_dim, dims.out_dim}, m_std, rng);
    p.fusion.mlp_b1 = Tensor::zeros({1, dims.out_dim}, true);
    p.fusion.mlp_w2 = normal_tensor({dims.out_dim, 1}, m_std, rng);
    p.fusion.mlp_b2 = Tensor::zeros({1, 1}, true);
    return p;
}

std::vector<std::pair<std::string, ad::TensorPtr>> ModelParams::named_parameters() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    out.emplace_back("embeddings", structure.embeddings);
    out.emplace_back("proj_weight_c", structure.proj_weight_c);
    out.emplace_back("proj_bias_c", structure.proj_bias_c);
    out.emplace_back("proj_weight_d", structure.proj_weight_d);
    out.emplace_back("proj_bias_d", structure.proj_bias_d);
    out.emplace_back("sim_weight_embed", structure.sim_weight_embed);
    out.emplace_back("sim_weight_feat", structure.sim_weight_feat);
    out.emplace_back("tau_raw", structure.tau_raw);
    auto add_gat = [&](const char* prefix, const GatChannelParams& gat) {
        for (std::size_t h = 0; h < gat.heads.size(); ++h) {
            out.emplace_back(std::string(prefix) + ".head" + std::to_string(h) + ".weight",
                             gat.heads[h].weight);
            out.emplace_back(std::string(prefix) + ".head" + std::to_string(h) + ".attn",
                             gat.heads[h].attn);
        }
    };
    add_gat("gat_continuous", gat_continuous);
    add_gat("gat_discrete", gat_discrete);
    add_gat("gat_hybrid", gat_hybrid);
    out.emplace_back("beta_raw", fusion.beta_raw);
    out.emplace_back("embed_proj", fusion.embed_proj);
    out.emplace_back("mlp_w1", fusion.mlp_w1);
    out.emplace_back("mlp_b1", fusion.mlp_b1);
    out.emplace_back("mlp_w2", fusion.mlp_w2);
    out.emplace_back("mlp_b2", fusion.mlp_b2);
    return out;
}

std::vector<ad::TensorPtr> ModelParams::parameters() const {
    std::vector<TensorPtr> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

ModelParams ModelParams::clone() const {
    ModelParams copy = *this;
    auto deep = [](TensorPtr& t) {
        if (t) t = Tensor::make(t->shape(), t->values, t->requires_grad);
    };
    deep(copy.structure.embeddings);
    deep(copy.structure.proj_weight_c);
    deep(copy.structure.proj_bias_c);
    deep(copy.structure.proj_weight_d);
    deep(copy.structure.proj_bias_d);
    deep(copy.structure.sim_weight_embed);
    deep(copy.structure.sim_weight_feat);
    deep(copy.structure.tau_raw);
    for (auto* gat : {&copy.gat_continuous, &copy.gat_discrete, &copy.gat_hybrid}) {
        for (auto& head : gat->heads) {
            deep(head.weight);
            deep(head.attn);
        }
    }
    deep(copy.fusion.beta_raw);
    deep(copy.fusion.embed_proj);
    deep(copy.fusion.mlp_w1);
    deep(copy.fusion.mlp_b1);
    deep(copy.fusion.mlp_w2);
    deep(copy.fusion.mlp_b2);
    return copy;
}

ad::TensorPtr gat_channel(const ad::TensorPtr& features, const ad::TensorPtr& adj_sub,
                          const GatChannelParams& params) {
    const std::size_t L = features->rows();
    if (adj_sub->rows() != L || adj_sub->cols() != L) {
        throw ShapeError("gat_channel: adjacency " + adj_sub->shape_str() +
                         " does not match " + std::to_string(L) + " feature rows");
    }
    if (params.heads.empty()) throw ConfigError("gat_channel: needs at least one head");

    // Neighbourhood mask from the adjacency values. A node is present when it
    // touches any edge (including its self-loop); present nodes must carry a
    // self-loop, absent nodes get a placeholder entry so every softmax row is
    // well defined, and their output is zeroed through the adjacency gate.
    ad::Mask mask(L * L, 0);
    std::vector<std::uint8_t> present(L, 0);
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
            if (adj_sub->values[i * L + j] > 0.5) {
                mask[i * L + j] = 1;
                present[i] = 1;
                present[j] = 1;
            }
        }
    }
    for (std::size_t i = 0; i < L; ++i) {
        if (present[i] && adj_sub->values[i * L + i] <= 0.5) {
            throw DataError("gat_channel: node " + std::to_string(i) +
                            " participates in the subgraph without a self-loop");
        }
        if (!mask[i * L + i]) mask[i * L + i] = 1;  // placeholder for absent rows
    }

    const std::size_t out_dim = params.heads.front().weight->cols();
    TensorPtr head_sum;
    for (const auto& head : params.heads) {
        auto z = ad::matmul(features, head.weight);  // L x out_dim
        auto a_src = ad::slice_rows(head.attn, 0, out_dim);
        auto a_dst = ad::slice_rows(head.attn, out_dim, out_dim);
        auto score = ad::outer_sum(ad::matmul(z, a_src), ad::matmul(z, a_dst));
        auto alpha = ad::softmax_rows(ad::leaky_relu(score, kAttentionLeakySlope), &mask);
        // Gate by the adjacency: forward is unchanged on retained edges (value
        // exactly 1) and zero elsewhere; backward feeds the straight-through
        // threshold surrogate.
        auto gated = ad::hadamard(alpha, adj_sub);
        auto msg = ad::matmul(gated, z);
        head_sum = head_sum ? ad::add(head_sum, msg) : msg;
    }
    auto mean = ad::scale_const(head_sum, 1.0 / static_cast<double>(params.heads.size()));
    return ad::selu(mean);
}

ad::TensorPtr channel_aggregate(const ad::TensorPtr& h_continuous,
                                const ad::TensorPtr& h_discrete,
                                const ad::TensorPtr& h_hybrid, const ad::TensorPtr& beta,
                                const std::vector<std::size_t>& continuous_idx,
                                const std::vector<std::size_t>& discrete_idx,
                                std::size_t n_nodes) {
    if (h_continuous->rows() != continuous_idx.size()) {
        throw ShapeError("channel_aggregate: got " + std::to_string(h_continuous->rows()) +
                         " continuous rows, schema has " +
                         std::to_string(continuous_idx.size()));
    }
    if (h_discrete->rows() != discrete_idx.size()) {
        throw ShapeError("channel_aggregate: got " + std::to_string(h_discrete->rows()) +
                         " discrete rows, schema has " + std::to_string(discrete_idx.size()));
    }
    const std::size_t width = h_continuous->cols();
    TensorPtr assembled;
    if (!continuous_idx.empty()) {
        assembled = ad::scatter_rows(h_continuous, continuous_idx, n_nodes);
    }
    if (!discrete_idx.empty()) {
        auto placed = ad::scatter_rows(h_discrete, discrete_idx, n_nodes);
        assembled = assembled ? ad::add(assembled, placed) : placed;
    }
    if (!assembled) assembled = Tensor::zeros({n_nodes, width});

    if (!beta) return assembled;  // hybrid channel disabled: beta fixed at 1
    if (h_hybrid->rows() != n_nodes) {
        throw ShapeError("channel_aggregate: hybrid rows " + std::to_string(h_hybrid->rows()) +
                         " do not cover " + std::to_string(n_nodes) + " nodes");
    }
    auto one_minus_beta = ad::add_const(ad::scale_const(beta, -1.0), 1.0);
    return ad::add(ad::scale_by_scalar(assembled, beta),
                   ad::scale_by_scalar(h_hybrid, one_minus_beta));
}

ad::TensorPtr predict(const ad::TensorPtr& h, const ad::TensorPtr& embeddings,
                      const FusionParams& fusion) {
    auto fused = ad::add(h, ad::matmul(embeddings, fusion.embed_proj));
    auto hidden = ad::selu(ad::add_rowvec(ad::matmul(fused, fusion.mlp_w1), fusion.mlp_b1));
    return ad::selu(ad::add_rowvec(ad::matmul(hidden, fusion.mlp_w2), fusion.mlp_b2));
}

ForwardResult forward(const ModelParams& params, const WindowSample& window,
                      const ForwardOptions& options) {
    const auto& schema = params.schema;
    const std::size_t L = schema.size();
    const auto idx_c = schema.indices_of(VariableKind::Continuous);
    const auto idx_d = schema.indices_of(VariableKind::Discrete);

    ForwardResult result;
    auto features = project_features(window, params.structure, schema);

    auto& bundle = result.bundle;
    if (!params.ablation.disable_embed_sim) {
        bundle.embed_sim = embedding_similarity(params.structure.embeddings, /*strict=*/false);
    }
    if (!params.ablation.disable_feat_sim) {
        bundle.feat_sim = feature_similarity(features, /*strict=*/false);
    }
    bundle.agg_sim = aggregate_similarity(bundle.embed_sim, bundle.feat_sim, params.structure);
    auto tau = ad::sigmoid(params.structure.tau_raw);
    auto thresholded = threshold_adjacency(bundle.agg_sim, tau);
    bundle.soft_adjacency = thresholded.soft_adjacency;
    if (options.soft_graph) {
        // Differentiable variant: sigmoid((agg - tau)/temperature) off the
        // diagonal, exact 1 on it.
        auto ones = Tensor::full({L, L}, 1.0);
        auto shifted = ad::add(bundle.agg_sim,
                               ad::scale_by_scalar(ones, ad::scale_const(tau, -1.0)));
        auto soft = ad::sigmoid(ad::scale_const(shifted, 1.0 / kThresholdTemperature));
        std::vector<double> offdiag(L * L, 1.0), eye(L * L, 0.0);
        for (std::size_t i = 0; i < L; ++i) {
            offdiag[i * L + i] = 0.0;
            eye[i * L + i] = 1.0;
        }
        bundle.adjacency = ad::add(ad::hadamard(soft, Tensor::make({L, L}, std::move(offdiag))),
                                   Tensor::make({L, L}, std::move(eye)));
    } else {
        bundle.adjacency = thresholded.adjacency;
    }
    auto subgraphs = extract_subgraphs(bundle.adjacency, schema);
    bundle.adj_cc = subgraphs.adj_cc;
    bundle.adj_dd = subgraphs.adj_dd;
    bundle.adj_cross = subgraphs.adj_cross;

    if (options.mode == ForwardMode::Train && options.mask_p > 0.0) {
        if (!options.mask_rng) {
            throw ConfigError("forward: training with mask_p > 0 needs a mask rng");
        }
        random_mask(bundle, options.mask_p, *options.mask_rng);
    }

    const std::size_t out_dim = params.dims.out_dim;
    TensorPtr h_c_rows, h_d_rows, h_hybrid;
    if (params.ablation.disable_continuous_channel || idx_c.empty()) {
        h_c_rows = Tensor::zeros({idx_c.size(), out_dim});
    } else {
        h_c_rows = ad::gather_rows(gat_channel(features, bundle.adj_cc, params.gat_continuous),
                                   idx_c);
    }
    if (params.ablation.disable_discrete_channel || idx_d.empty()) {
        h_d_rows = Tensor::zeros({idx_d.size(), out_dim});
    } else {
        h_d_rows = ad::gather_rows(gat_channel(features, bundle.adj_dd, params.gat_discrete),
                                   idx_d);
    }
    TensorPtr beta;
    if (!params.ablation.disable_hybrid_channel) {
        h_hybrid = gat_channel(features, bundle.adj_cross, params.gat_hybrid);
        beta = ad::sigmoid(params.fusion.beta_raw);
    }
    auto h = channel_aggregate(h_c_rows, h_d_rows, h_hybrid, beta, idx_c, idx_d, L);
    result.prediction = predict(h, params.structure.embeddings, params.fusion);
    if (result.prediction->rows() != L) {
        throw ShapeError("forward: prediction has " + std::to_string(result.prediction->rows()) +
                         " rows for " + std::to_string(L) + " variables");
    }
    return result;
}

}  // namespace hgad
