#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hgad/adam.hpp"
#include "hgad/error.hpp"
#include "hgad/model.hpp"
#include "oracles.hpp"

using namespace hgad;
using ad::Tensor;
using ad::TensorPtr;

namespace {

GatChannelParams random_gat(std::size_t proj_dim, std::size_t out_dim, std::size_t heads,
                            std::mt19937_64& rng) {
    GatChannelParams gat;
    for (std::size_t h = 0; h < heads; ++h) {
        GatChannelParams::Head head;
        head.weight = Tensor::matrix(proj_dim, out_dim,
                                     oracles::random_values(rng, proj_dim * out_dim), true);
        head.attn = Tensor::matrix(2 * out_dim, 1, oracles::random_values(rng, 2 * out_dim), true);
        gat.heads.push_back(std::move(head));
    }
    return gat;
}

std::vector<oracles::GatOracleHead> to_oracle(const GatChannelParams& gat) {
    std::vector<oracles::GatOracleHead> heads;
    for (const auto& h : gat.heads) heads.push_back({h.weight->values, h.attn->values});
    return heads;
}

VariableSchema mixed_schema(std::size_t n_c, std::size_t n_d) {
    VariableSchema s;
    for (std::size_t i = 0; i < n_c; ++i)
        s.entries.push_back({"s" + std::to_string(i), VariableKind::Continuous});
    for (std::size_t k = 0; k < n_d; ++k)
        s.entries.push_back({"a" + std::to_string(k), VariableKind::Discrete});
    return s;
}

WindowSample random_window(const VariableSchema& schema, std::size_t omega,
                           std::mt19937_64& rng) {
    WindowSample w;
    w.n_vars = schema.size();
    w.window = omega;
    w.input = oracles::random_values(rng, w.n_vars * omega);
    w.target = oracles::random_values(rng, w.n_vars, 0.0, 1.0);
    return w;
}

}  // namespace

TEST_CASE("gat_channel: single node with self-loop only") {
    std::mt19937_64 rng(1);
    auto gat = random_gat(2, 2, 1, rng);
    auto f = Tensor::matrix(1, 2, {0.4, -0.3});
    auto adj = Tensor::matrix(1, 1, {1.0});
    auto h = gat_channel(f, adj, gat);
    // alpha = 1: output = SELU(W f).
    auto expect = oracles::gat_oracle(f->values, 1, 2, adj->values, to_oracle(gat), 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(h->values[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
}

TEST_CASE("gat_channel: identical features + full adjacency give identical rows") {
    std::mt19937_64 rng(2);
    auto gat = random_gat(3, 2, 2, rng);
    auto f = Tensor::matrix(2, 3, {0.5, -0.2, 0.9, 0.5, -0.2, 0.9});
    auto adj = Tensor::full({2, 2}, 1.0);
    auto h = gat_channel(f, adj, gat);
    CHECK(h->at(0, 0) == doctest::Approx(h->at(1, 0)).epsilon(1e-12));
    CHECK(h->at(0, 1) == doctest::Approx(h->at(1, 1)).epsilon(1e-12));
}

TEST_CASE("gat_channel: contract violation without self-loop") {
    std::mt19937_64 rng(3);
    auto gat = random_gat(2, 2, 1, rng);
    auto f = Tensor::matrix(2, 2, oracles::random_values(rng, 4));
    auto adj = Tensor::matrix(2, 2, {1, 1, 1, 0});  // node 1 participates, no self-loop
    CHECK_THROWS_AS(gat_channel(f, adj, gat), DataError);
}

TEST_CASE("gat_channel matches the dense-loop oracle on random instances") {
    std::mt19937_64 rng(42);
    int checked = 0;
    while (checked < 200) {
        const std::size_t L = 2 + rng() % 5;       // <= 6
        const std::size_t heads = 1 + rng() % 3;   // <= 3
        const std::size_t proj_dim = 2 + rng() % 4;
        const std::size_t out_dim = 2 + rng() % 3;
        auto gat = random_gat(proj_dim, out_dim, heads, rng);
        auto f = Tensor::matrix(L, proj_dim, oracles::random_values(rng, L * proj_dim));
        std::vector<double> adj(L * L, 0.0);
        for (std::size_t i = 0; i < L; ++i) {
            for (std::size_t j = 0; j < L; ++j) {
                if (rng() % 3 == 0) adj[i * L + j] = 1.0;
            }
        }
        // Present nodes need self-loops; leave some nodes fully absent.
        for (std::size_t i = 0; i < L; ++i) {
            bool incident = false;
            for (std::size_t j = 0; j < L; ++j) {
                incident = incident || adj[i * L + j] > 0.5 || adj[j * L + i] > 0.5;
            }
            if (incident) adj[i * L + i] = 1.0;
        }
        auto h = gat_channel(Tensor::make({L, proj_dim}, f->values),
                             Tensor::matrix(L, L, adj), gat);
        auto expect = oracles::gat_oracle(f->values, L, proj_dim, adj, to_oracle(gat), out_dim);
        for (std::size_t i = 0; i < L * out_dim; ++i) {
            CHECK(std::fabs(h->values[i] - expect[i]) < 1e-10);
        }
        ++checked;
    }
}

TEST_CASE("gat_channel attention rows: sum to one on neighbourhoods, zero off-support") {
    // Verified indirectly through softmax_rows tests; here assert absent-node
    // rows are exactly zero.
    std::mt19937_64 rng(5);
    auto gat = random_gat(3, 2, 2, rng);
    auto f = Tensor::matrix(3, 3, oracles::random_values(rng, 9));
    auto adj = Tensor::matrix(3, 3, {1, 1, 0, 1, 1, 0, 0, 0, 0});  // node 2 absent
    auto h = gat_channel(f, adj, gat);
    CHECK(h->at(2, 0) == 0.0);
    CHECK(h->at(2, 1) == 0.0);
    CHECK(h->at(0, 0) != 0.0);
}

TEST_CASE("channel_aggregate limits and convex combination") {
    const std::vector<std::size_t> idx_c = {0, 2}, idx_d = {1};
    auto h_c = Tensor::matrix(2, 2, {1, 2, 3, 4});
    auto h_d = Tensor::matrix(1, 2, {9, 9});
    auto h_cd = Tensor::full({3, 2}, 2.0);

    SUBCASE("beta null (hybrid disabled) returns the assembled rows") {
        auto h = channel_aggregate(h_c, h_d, nullptr, nullptr, idx_c, idx_d, 3);
        CHECK(h->values == std::vector<double>{1, 2, 9, 9, 3, 4});
    }

    SUBCASE("beta -> 1 keeps the assembled half, beta -> 0 keeps hybrid") {
        auto near_one = Tensor::scalar(1.0 - 1e-15);
        auto h1 = channel_aggregate(h_c, h_d, h_cd, near_one, idx_c, idx_d, 3);
        CHECK(h1->at(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
        auto near_zero = Tensor::scalar(1e-15);
        auto h0 = channel_aggregate(h_c, h_d, h_cd, near_zero, idx_c, idx_d, 3);
        CHECK(h0->at(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
    }

    SUBCASE("beta = 0.5, zeros vs twos -> ones") {
        auto zero_c = Tensor::zeros({2, 2});
        auto zero_d = Tensor::zeros({1, 2});
        auto h = channel_aggregate(zero_c, zero_d, h_cd, Tensor::scalar(0.5), idx_c, idx_d, 3);
        for (double v : h->values) CHECK(v == doctest::Approx(1.0));
    }

    SUBCASE("row count mismatch throws") {
        CHECK_THROWS_AS(channel_aggregate(h_c, h_d, h_cd, Tensor::scalar(0.5), {0}, idx_d, 3),
                        ShapeError);
    }
}

TEST_CASE("predict: zero inputs with zero biases give zero, shared head is symmetric") {
    std::mt19937_64 rng(6);
    ModelDims dims;
    dims.window = 3;
    dims.proj_dim = 4;
    dims.out_dim = 3;
    dims.heads = 1;
    auto params = ModelParams::init(mixed_schema(2, 1), dims, {}, rng);

    auto h0 = Tensor::zeros({3, 3});
    auto e0 = Tensor::zeros({3, 4});
    auto out = predict(h0, e0, params.fusion);
    for (double v : out->values) CHECK(v == doctest::Approx(0.0));  // SELU(0) = 0, zero biases

    auto h_same = Tensor::matrix(3, 3, {1, 2, 3, 1, 2, 3, 1, 2, 3});
    auto e_same = Tensor::matrix(3, 4, {4, 5, 6, 7, 4, 5, 6, 7, 4, 5, 6, 7});
    auto out2 = predict(h_same, e_same, params.fusion);
    CHECK(out2->values[0] == doctest::Approx(out2->values[1]).epsilon(1e-12));
    CHECK(out2->values[1] == doctest::Approx(out2->values[2]).epsilon(1e-12));
}

TEST_CASE("forward: deterministic, right shape, composable") {
    std::mt19937_64 rng(7);
    auto schema = mixed_schema(3, 2);
    ModelDims dims;
    dims.window = 4;
    dims.proj_dim = 6;
    dims.out_dim = 3;
    dims.heads = 2;
    auto params = ModelParams::init(schema, dims, {}, rng);
    auto w = random_window(schema, dims.window, rng);

    auto p1 = forward(params, w).prediction;
    auto p2 = forward(params, w).prediction;
    CHECK(p1->values == p2->values);
    CHECK(p1->shape() == std::vector<std::size_t>{5, 1});

    SUBCASE("composition equals the explicitly chained ops") {
        auto features = project_features(w, params.structure, schema);
        auto es = embedding_similarity(params.structure.embeddings, false);
        auto fs = feature_similarity(features, false);
        auto agg = aggregate_similarity(es, fs, params.structure);
        auto thr = threshold_adjacency(agg, ad::sigmoid(params.structure.tau_raw));
        auto sub = extract_subgraphs(thr.adjacency, schema);
        auto idx_c = schema.indices_of(VariableKind::Continuous);
        auto idx_d = schema.indices_of(VariableKind::Discrete);
        auto h_c = ad::gather_rows(gat_channel(features, sub.adj_cc, params.gat_continuous), idx_c);
        auto h_d = ad::gather_rows(gat_channel(features, sub.adj_dd, params.gat_discrete), idx_d);
        auto h_cd = gat_channel(features, sub.adj_cross, params.gat_hybrid);
        auto h = channel_aggregate(h_c, h_d, h_cd, ad::sigmoid(params.fusion.beta_raw),
                                   idx_c, idx_d, schema.size());
        auto manual = predict(h, params.structure.embeddings, params.fusion);
        for (std::size_t i = 0; i < manual->size(); ++i) {
            CHECK(manual->values[i] == doctest::Approx(p1->values[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("end-to-end gradients match finite differences for every parameter group") {
    std::mt19937_64 rng(11);
    auto schema = mixed_schema(2, 2);  // 4-variable instance
    ModelDims dims;
    dims.window = 3;
    dims.proj_dim = 5;
    dims.out_dim = 3;
    dims.heads = 2;
    auto params = ModelParams::init(schema, dims, {}, rng);
    auto w = random_window(schema, dims.window, rng);
    auto target_values = w.target;

    // The hard threshold is piecewise constant, so the suite checks the
    // differentiable surrogate forward (soft_graph) end to end; the
    // straight-through path has its own gradient-reach test.
    ForwardOptions soft;
    soft.soft_graph = true;

    auto eval = [&] {
        auto pred = forward(params, w, soft).prediction;
        double acc = 0.0;
        for (std::size_t i = 0; i < pred->size(); ++i) {
            const double d = pred->values[i] - target_values[i];
            acc += d * d;
        }
        return acc / static_cast<double>(pred->size());
    };

    ad::Tape tape;
    {
        ad::TapeScope scope(tape);
        auto pred = forward(params, w, soft).prediction;
        auto target = Tensor::make({w.target.size(), 1}, target_values);
        tape.backward(ad::mse_loss(pred, target));
    }

    for (auto& [name, tensor] : params.named_parameters()) {
        CAPTURE(name);
        REQUIRE(tensor->grad_ready());
        auto fd = oracles::finite_difference(tensor->values, eval);
        const double err = oracles::max_grad_rel_err(tensor->grad, fd);
        CHECK_MESSAGE(err < 1e-3, "param ", name, " rel err ", err);
    }
    tape.clear();
}

TEST_CASE("node permutation equivariance") {
    std::mt19937_64 rng(17);
    auto schema = mixed_schema(3, 2);
    const std::size_t L = schema.size();
    ModelDims dims;
    dims.window = 3;
    dims.proj_dim = 4;
    dims.out_dim = 3;
    dims.heads = 2;
    auto params = ModelParams::init(schema, dims, {}, rng);
    auto w = random_window(schema, dims.window, rng);
    auto base = forward(params, w).prediction;

    // Permute variables (keep a valid mixed schema ordering).
    std::vector<std::size_t> perm = {2, 0, 4, 1, 3};
    VariableSchema p_schema;
    for (auto i : perm) p_schema.entries.push_back(schema.entries[i]);

    ModelParams p_params = params.clone();
    p_params.schema = p_schema;
    auto permute_rows = [&](TensorPtr& t) {
        auto fresh = t->values;
        const std::size_t cols = t->cols();
        for (std::size_t r = 0; r < L; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                fresh[r * cols + c] = t->values[perm[r] * cols + c];
            }
        }
        t = Tensor::make(t->shape(), fresh, t->requires_grad);
    };
    auto permute_matrix = [&](TensorPtr& t) {
        auto fresh = t->values;
        for (std::size_t r = 0; r < L; ++r) {
            for (std::size_t c = 0; c < L; ++c) {
                fresh[r * L + c] = t->values[perm[r] * L + perm[c]];
            }
        }
        t = Tensor::make(t->shape(), fresh, t->requires_grad);
    };
    permute_rows(p_params.structure.embeddings);
    permute_matrix(p_params.structure.sim_weight_embed);
    permute_matrix(p_params.structure.sim_weight_feat);

    WindowSample p_w = w;
    for (std::size_t r = 0; r < L; ++r) {
        for (std::size_t c = 0; c < dims.window; ++c) {
            p_w.input[r * dims.window + c] = w.input[perm[r] * dims.window + c];
        }
        p_w.target[r] = w.target[perm[r]];
    }
    auto permuted = forward(p_params, p_w).prediction;
    for (std::size_t r = 0; r < L; ++r) {
        CHECK(permuted->values[r] == doctest::Approx(base->values[perm[r]]).epsilon(1e-10));
    }
}

TEST_CASE("ablation flags: validation and parsing") {
    AblationFlags flags;
    flags.disable_discrete_channel = true;
    flags.disable_continuous_channel = true;
    flags.disable_hybrid_channel = true;
    CHECK_THROWS_AS(flags.validate(), ConfigError);

    AblationFlags sims;
    sims.disable_embed_sim = true;
    sims.disable_feat_sim = true;
    CHECK_THROWS_AS(sims.validate(), ConfigError);

    auto parsed = AblationFlags::parse("NE,DFS");
    CHECK(parsed.disable_embed_sim);
    CHECK(parsed.disable_discrete_channel);
    CHECK(parsed.summary() == "NE,DFS");
    CHECK(AblationFlags::parse("none").summary() == "none");
    CHECK_THROWS_AS(AblationFlags::parse("XX"), ConfigError);
}

TEST_CASE("ablations: removed components get zero gradient / no influence") {
    std::mt19937_64 rng(19);
    auto schema = mixed_schema(2, 2);
    ModelDims dims;
    dims.window = 3;
    dims.proj_dim = 4;
    dims.out_dim = 3;
    dims.heads = 1;

    SUBCASE("disable_embed_sim zeroes the embedding similarity weight gradient") {
        AblationFlags flags;
        flags.disable_embed_sim = true;
        auto params = ModelParams::init(schema, dims, flags, rng);
        auto w = random_window(schema, dims.window, rng);
        ad::Tape tape;
        {
            ad::TapeScope scope(tape);
            auto pred = forward(params, w).prediction;
            tape.backward(ad::mse_loss(pred, Tensor::make({4, 1}, w.target)));
        }
        CHECK(!params.structure.sim_weight_embed->grad_ready());
        CHECK(params.structure.sim_weight_feat->grad_ready());
        tape.clear();
    }

    SUBCASE("disable_hybrid_channel makes the output independent of cross edges") {
        AblationFlags flags;
        flags.disable_hybrid_channel = true;
        auto params = ModelParams::init(schema, dims, flags, rng);
        auto w = random_window(schema, dims.window, rng);
        auto p1 = forward(params, w).prediction;
        // beta_raw must not influence anything now.
        params.fusion.beta_raw->values[0] = 5.0;
        auto p2 = forward(params, w).prediction;
        CHECK(p1->values == p2->values);
        ad::Tape tape;
        {
            ad::TapeScope scope(tape);
            auto pred = forward(params, w).prediction;
            tape.backward(ad::mse_loss(pred, Tensor::make({4, 1}, w.target)));
        }
        CHECK(!params.fusion.beta_raw->grad_ready());
        tape.clear();
    }
}

TEST_CASE("degenerate schema without discrete variables still runs") {
    std::mt19937_64 rng(23);
    auto schema = mixed_schema(3, 0);
    ModelDims dims;
    dims.window = 3;
    dims.proj_dim = 4;
    dims.out_dim = 2;
    dims.heads = 1;
    auto params = ModelParams::init(schema, dims, {}, rng);
    auto w = random_window(schema, dims.window, rng);
    auto pred = forward(params, w).prediction;
    CHECK(pred->rows() == 3);
    for (double v : pred->values) CHECK(std::isfinite(v));
}

TEST_CASE("training-mode masking is reproducible and changes the graph") {
    std::mt19937_64 rng(29);
    auto schema = mixed_schema(3, 2);
    ModelDims dims;
    dims.window = 3;
    dims.proj_dim = 4;
    dims.out_dim = 3;
    dims.heads = 1;
    auto params = ModelParams::init(schema, dims, {}, rng);
    auto w = random_window(schema, dims.window, rng);

    ForwardOptions opts;
    opts.mode = ForwardMode::Train;
    opts.mask_p = 0.6;
    std::mt19937_64 m1(500), m2(500);
    opts.mask_rng = &m1;
    auto r1 = forward(params, w, opts);
    opts.mask_rng = &m2;
    auto r2 = forward(params, w, opts);
    CHECK(r1.bundle.adj_cross->values == r2.bundle.adj_cross->values);
    CHECK(r1.prediction->values == r2.prediction->values);
}
