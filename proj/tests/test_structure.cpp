#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "hgad/error.hpp"
#include "hgad/model.hpp"
#include "hgad/structure.hpp"
#include "oracles.hpp"

using namespace hgad;
using ad::Tensor;
using ad::TensorPtr;

namespace {

VariableSchema schema_ccd() {
    VariableSchema s;
    s.entries = {{"s0", VariableKind::Continuous},
                 {"s1", VariableKind::Continuous},
                 {"a0", VariableKind::Discrete}};
    return s;
}

VariableSchema random_schema(std::mt19937_64& rng, std::size_t L) {
    VariableSchema s;
    for (std::size_t i = 0; i < L; ++i) {
        s.entries.push_back({"v" + std::to_string(i),
                             rng() % 2 ? VariableKind::Continuous : VariableKind::Discrete});
    }
    return s;
}

StructureParams small_params(const VariableSchema& schema, std::size_t omega,
                             std::size_t proj_dim, std::mt19937_64& rng) {
    ModelDims dims;
    dims.window = omega;
    dims.proj_dim = proj_dim;
    dims.out_dim = 3;
    dims.heads = 1;
    return ModelParams::init(schema, dims, {}, rng).structure;
}

}  // namespace

TEST_CASE("project_features applies the per-kind affine map and SELU") {
    auto schema = schema_ccd();
    std::mt19937_64 rng(1);
    auto params = small_params(schema, 1, 1, rng);
    // omega = proj_dim = 1: scalar weights, hand-checkable.
    params.proj_weight_c->values = {1.0};
    params.proj_bias_c->values = {0.0};
    params.proj_weight_d->values = {2.0};
    params.proj_bias_d->values = {0.0};

    WindowSample w;
    w.n_vars = 3;
    w.window = 1;
    w.input = {1.0, 0.0, 1.0};
    w.target = {0, 0, 0};

    auto f = project_features(w, params, schema);
    CHECK(f->at(0, 0) == doctest::Approx(1.05070098).epsilon(1e-9));  // SELU(1)
    CHECK(f->at(1, 0) == doctest::Approx(0.0));                       // SELU(0) = 0
    // Discrete row uses the discrete weights: SELU(2) = lambda * 2.
    CHECK(f->at(2, 0) == doctest::Approx(2.0 * 1.05070098).epsilon(1e-9));

    SUBCASE("identical values, different kind weights give different outputs") {
        WindowSample w2 = w;
        w2.input = {1.0, 1.0, 1.0};
        auto f2 = project_features(w2, params, schema);
        CHECK(f2->at(0, 0) != f2->at(2, 0));
        CHECK(f2->at(0, 0) == f2->at(1, 0));
    }
}

TEST_CASE("similarity matrices match the scalar-loop oracle to 1e-12") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t L = 2 + rng() % 5, d = 2 + rng() % 5;
        auto x = Tensor::matrix(L, d, oracles::random_values(rng, L * d, -2.0, 2.0));
        auto sim = feature_similarity(x);
        auto expect = oracles::cosine_oracle(x->values, L, d);
        for (std::size_t i = 0; i < L * L; ++i) {
            CHECK(std::fabs(sim->values[i] - expect[i]) < 1e-12);
        }
        // symmetric, unit diagonal, entries in [-1, 1]
        for (std::size_t i = 0; i < L; ++i) {
            CHECK(sim->at(i, i) == doctest::Approx(1.0).epsilon(1e-9));
            for (std::size_t j = 0; j < L; ++j) {
                CHECK(sim->at(i, j) == sim->at(j, i));
                CHECK(sim->at(i, j) <= 1.0 + 1e-9);
                CHECK(sim->at(i, j) >= -1.0 - 1e-9);
            }
        }
    }
}

TEST_CASE("embedding_similarity: zero-norm row errors at the API boundary") {
    auto e = Tensor::matrix(2, 2, {1, 0, 0, 0});
    CHECK_THROWS_AS(embedding_similarity(e), DataError);
    auto guarded = embedding_similarity(e, /*strict=*/false);
    CHECK(guarded->at(0, 1) == 0.0);  // clamped denominator, no NaN
    CHECK(std::isfinite(guarded->at(1, 1)));

    auto ok = Tensor::matrix(2, 2, {1, 1, 1, 0});
    CHECK(embedding_similarity(ok)->at(0, 1) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(embedding_similarity(ok)->at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("aggregate_similarity weights and ablation limits") {
    auto schema = schema_ccd();
    std::mt19937_64 rng(2);
    auto params = small_params(schema, 2, 2, rng);

    auto eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    auto agg = aggregate_similarity(eye, eye, params);  // weights start at all-ones
    for (std::size_t i = 0; i < 3; ++i) CHECK(agg->at(i, i) == doctest::Approx(2.0));

    SUBCASE("dropping the embedding term leaves the feature term") {
        auto feat_only = aggregate_similarity(nullptr, eye, params);
        for (std::size_t i = 0; i < 9; ++i) CHECK(feat_only->values[i] == eye->values[i]);
        CHECK_THROWS_AS(aggregate_similarity(nullptr, nullptr, params), ConfigError);
    }

    SUBCASE("random inputs match the elementwise formula exactly") {
        for (int rep = 0; rep < 20; ++rep) {
            auto a = Tensor::matrix(3, 3, oracles::random_values(rng, 9));
            auto b = Tensor::matrix(3, 3, oracles::random_values(rng, 9));
            params.sim_weight_embed->values = oracles::random_values(rng, 9);
            params.sim_weight_feat->values = oracles::random_values(rng, 9);
            auto m = aggregate_similarity(a, b, params);
            for (std::size_t i = 0; i < 9; ++i) {
                CHECK(m->values[i] ==
                      a->values[i] * params.sim_weight_embed->values[i] +
                          b->values[i] * params.sim_weight_feat->values[i]);
            }
        }
    }
}

TEST_CASE("threshold_adjacency: hard rule, boundary, self-loops, surrogate") {
    auto m = Tensor::matrix(2, 2, {0.9, 0.2, 0.2, 0.9});
    auto res = threshold_adjacency(m, Tensor::scalar(0.5));
    CHECK(res.adjacency->values == std::vector<double>{1, 0, 0, 1});

    auto boundary = threshold_adjacency(Tensor::matrix(2, 2, {0.5, 0.1, 0.2, 0.3}),
                                        Tensor::scalar(0.5));
    CHECK(boundary.adjacency->at(0, 0) == 1.0);  // >= is inclusive
    CHECK(boundary.adjacency->at(1, 1) == 1.0);  // forced self-loop despite 0.3 < 0.5

    auto low = threshold_adjacency(Tensor::matrix(2, 2, {0.5, 0.4, 0.6, 0.2}),
                                   Tensor::scalar(1e-6));
    for (double v : low.adjacency->values) CHECK(v == 1.0);

    CHECK(res.soft_adjacency->at(0, 0) > 0.5);
    CHECK(res.soft_adjacency->at(0, 1) < 0.5);
    CHECK_THROWS_AS(threshold_adjacency(m, Tensor::scalar(1.5)), ConfigError);
}

TEST_CASE("argmask invariance: perturbations that do not cross tau keep A fixed") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t L = 3 + rng() % 3;
        auto vals = oracles::random_values(rng, L * L, -1.0, 1.0);
        const double tau = 0.3;
        auto base = threshold_adjacency(Tensor::matrix(L, L, vals), Tensor::scalar(tau));
        auto perturbed = vals;
        for (auto& v : perturbed) {
            const double margin = std::fabs(v - tau);
            if (margin > 1e-12) v += 0.5 * margin * dist(rng);
        }
        auto shifted = threshold_adjacency(Tensor::matrix(L, L, perturbed), Tensor::scalar(tau));
        CHECK(base.adjacency->values == shifted.adjacency->values);
    }
}

TEST_CASE("extract_subgraphs enumerated case (C,C,D)") {
    auto schema = schema_ccd();
    auto all_ones = Tensor::full({3, 3}, 1.0);
    auto sub = extract_subgraphs(all_ones, schema);

    CHECK(sub.adj_cc->values == std::vector<double>{1, 1, 0, 1, 1, 0, 0, 0, 0});
    CHECK(sub.adj_dd->values == std::vector<double>{0, 0, 0, 0, 0, 0, 0, 0, 1});
    CHECK(sub.adj_cross->values == std::vector<double>{1, 0, 1, 0, 1, 1, 1, 1, 1});

    SUBCASE("identity adjacency keeps only self-loops") {
        auto eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
        auto s = extract_subgraphs(eye, schema);
        CHECK(s.adj_cc->values == std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 0});
        CHECK(s.adj_dd->values == std::vector<double>{0, 0, 0, 0, 0, 0, 0, 0, 1});
        CHECK(s.adj_cross->values == std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
    }

    SUBCASE("no discrete variables: empty dd, cross reduces to self-loops") {
        VariableSchema cc;
        cc.entries = {{"x", VariableKind::Continuous}, {"y", VariableKind::Continuous}};
        auto s = extract_subgraphs(Tensor::full({2, 2}, 1.0), cc);
        CHECK(s.adj_dd->values == std::vector<double>{0, 0, 0, 0});
        CHECK(s.adj_cross->values == std::vector<double>{1, 0, 0, 1});
    }
}

TEST_CASE("subgraph partition covers the adjacency support exactly") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t L = 2 + rng() % 6;
        auto schema = random_schema(rng, L);
        std::vector<double> adj(L * L);
        for (auto& v : adj) v = rng() % 2 ? 1.0 : 0.0;
        for (std::size_t i = 0; i < L; ++i) adj[i * L + i] = 1.0;  // threshold forces these
        auto a = Tensor::matrix(L, L, adj);
        auto sub = extract_subgraphs(a, schema);
        for (std::size_t i = 0; i < L; ++i) {
            for (std::size_t j = 0; j < L; ++j) {
                const double cc = sub.adj_cc->at(i, j);
                const double dd = sub.adj_dd->at(i, j);
                double cross = sub.adj_cross->at(i, j);
                if (i == j) {
                    // Self-loops: one per kind subgraph plus the forced cross loop.
                    CHECK(cross == 1.0);
                    CHECK(cc + dd == 1.0);
                    continue;
                }
                CHECK(cc + dd + cross == a->at(i, j));  // lands in exactly one subgraph
            }
        }
    }
}

TEST_CASE("random_mask keeps self-loops, is deterministic, p=0 identity") {
    auto schema = schema_ccd();

    auto build_bundle = [&] {
        GraphBundle b;
        auto sub = extract_subgraphs(Tensor::full({3, 3}, 1.0), schema);
        b.adj_cc = sub.adj_cc;
        b.adj_dd = sub.adj_dd;
        b.adj_cross = sub.adj_cross;
        return b;
    };

    SUBCASE("p=0 leaves everything") {
        auto b = build_bundle();
        const auto before = b.adj_cross->values;
        std::mt19937_64 rng(1);
        random_mask(b, 0.0, rng);
        CHECK(b.adj_cross->values == before);
    }

    SUBCASE("p near 1 keeps only self-loops") {
        auto b = build_bundle();
        std::mt19937_64 rng(1);
        random_mask(b, 0.999999, rng);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                if (i == j) continue;
                CHECK(b.adj_cc->at(i, j) == 0.0);
                CHECK(b.adj_cross->at(i, j) == 0.0);
            }
        }
        CHECK(b.adj_cross->at(0, 0) == 1.0);
        CHECK(b.adj_cc->at(1, 1) == 1.0);
        CHECK(b.adj_dd->at(2, 2) == 1.0);
    }

    SUBCASE("identical seeds give identical masks") {
        auto b1 = build_bundle(), b2 = build_bundle();
        std::mt19937_64 r1(9), r2(9);
        random_mask(b1, 0.5, r1);
        random_mask(b2, 0.5, r2);
        CHECK(b1.adj_cc->values == b2.adj_cc->values);
        CHECK(b1.adj_cross->values == b2.adj_cross->values);
    }

    SUBCASE("survival count within the 3-sigma binomial envelope") {
        // 1000 off-diagonal edges in one fully connected continuous block.
        VariableSchema big;
        for (int i = 0; i < 34; ++i) {
            big.entries.push_back({"v" + std::to_string(i), VariableKind::Continuous});
        }
        const std::size_t L = big.size();
        GraphBundle b;
        auto sub = extract_subgraphs(Tensor::full({L, L}, 1.0), big);
        b.adj_cc = sub.adj_cc;
        std::mt19937_64 rng(17);
        random_mask(b, 0.5, rng);
        std::size_t survivors = 0, edges = 0;
        for (std::size_t i = 0; i < L; ++i) {
            for (std::size_t j = 0; j < L; ++j) {
                if (i == j) continue;
                ++edges;
                if (b.adj_cc->at(i, j) > 0.5) ++survivors;
            }
        }
        CHECK(edges == L * L - L);  // 1122 edges, near the 1000 of the bound
        const double expected = 0.5 * static_cast<double>(edges);
        const double sigma = std::sqrt(static_cast<double>(edges) * 0.25);
        CHECK(std::fabs(static_cast<double>(survivors) - expected) <= 3.0 * sigma);
    }
}

TEST_CASE("gradient reaches tau through the full structure stage") {
    std::mt19937_64 rng(23);
    auto schema = schema_ccd();
    ModelDims dims;
    dims.window = 4;
    dims.proj_dim = 5;
    dims.out_dim = 3;
    dims.heads = 2;
    auto params = ModelParams::init(schema, dims, {}, rng);
    // Guarantee retained off-diagonal edges: the surrogate only carries
    // gradient through thresholded entries, not the forced self-loops.
    params.structure.tau_raw->values[0] = -2.0;

    WindowSample w;
    w.n_vars = 3;
    w.window = 4;
    w.input = oracles::random_values(rng, 12);
    w.target = {0.1, 0.2, 0.3};

    ad::Tape tape;
    {
        ad::TapeScope scope(tape);
        auto out = forward(params, w);
        auto target = Tensor::make({3, 1}, w.target);
        tape.backward(ad::mse_loss(out.prediction, target));
    }
    REQUIRE(params.structure.tau_raw->grad_ready());
    CHECK(params.structure.tau_raw->grad[0] != 0.0);
    // The similarity weights only feed the graph; the surrogate must reach them.
    double w_es_mag = 0.0;
    for (double g : params.structure.sim_weight_embed->grad) w_es_mag += std::fabs(g);
    CHECK(w_es_mag > 0.0);
    tape.clear();
}

TEST_CASE("export_graph writes named CSVs") {
    auto schema = schema_ccd();
    GraphBundle bundle;
    bundle.embed_sim = Tensor::full({3, 3}, 0.5);
    bundle.feat_sim = Tensor::full({3, 3}, 0.25);
    bundle.agg_sim = Tensor::full({3, 3}, 0.75);
    bundle.adjacency = Tensor::full({3, 3}, 1.0);
    const auto dir = std::filesystem::temp_directory_path() / "hgad_export_test";
    std::filesystem::remove_all(dir);
    export_graph(bundle, schema, dir.string(), "t0_");
    for (const char* name : {"t0_embedding_similarity.csv", "t0_feature_similarity.csv",
                             "t0_aggregated_similarity.csv", "t0_adjacency.csv"}) {
        CAPTURE(name);
        CHECK(std::filesystem::exists(dir / name));
    }
    std::ifstream in(dir / "t0_embedding_similarity.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "variable,s0,s1,a0");
    std::filesystem::remove_all(dir);
}
