#include <benchmark/benchmark.h>

#include <random>

#include "hgad/adam.hpp"
#include "hgad/detector.hpp"
#include "hgad/model.hpp"
#include "hgad/ops.hpp"
#include "hgad/synth.hpp"

using namespace hgad;

namespace {

SynthConfig bench_synth(std::size_t t_train, std::size_t t_test) {
    SynthConfig cfg;
    cfg.n_continuous = 8;
    cfg.n_discrete = 4;
    cfg.t_train = t_train;
    cfg.t_test = t_test;
    cfg.seed = 7;
    return cfg;
}

struct Fixture {
    ModelParams params;
    std::vector<WindowSample> windows;

    static Fixture make() {
        auto data = synth_generate(bench_synth(400, 100), 7);
        const auto norm = fit_normalizer(data.train);
        auto frame = apply_normalizer(data.train, norm);
        ModelDims dims;  // spec defaults: 15 / 64 / 10 / 4 heads
        std::mt19937_64 rng(1);
        return {ModelParams::init(frame.schema, dims, {}, rng),
                make_windows(frame, dims.window)};
    }
};

void BM_ForwardPass(benchmark::State& state) {
    auto fx = Fixture::make();
    std::size_t i = 0;
    for (auto _ : state) {
        auto out = forward(fx.params, fx.windows[i++ % fx.windows.size()]);
        benchmark::DoNotOptimize(out.prediction->values.data());
    }
}
BENCHMARK(BM_ForwardPass);

void BM_TrainStep(benchmark::State& state) {
    auto fx = Fixture::make();
    ad::Adam opt(fx.params.parameters(), {1e-3});
    opt.zero_grad();
    ad::Tape tape;
    std::size_t i = 0;
    for (auto _ : state) {
        tape.clear();
        ad::TapeScope scope(tape);
        const auto& w = fx.windows[i++ % fx.windows.size()];
        auto pred = forward(fx.params, w).prediction;
        auto target = ad::Tensor::make({w.target.size(), 1}, w.target);
        tape.backward(ad::mse_loss(pred, target));
        opt.step();
    }
}
BENCHMARK(BM_TrainStep);

void BM_CosineMatrix(benchmark::State& state) {
    const std::size_t L = state.range(0);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist;
    std::vector<double> v(L * 64);
    for (auto& x : v) x = dist(rng);
    auto e = ad::Tensor::make({L, 64}, v);
    for (auto _ : state) {
        auto c = ad::cosine_matrix(e);
        benchmark::DoNotOptimize(c->values.data());
    }
}
BENCHMARK(BM_CosineMatrix)->Arg(12)->Arg(64)->Arg(128);

void BM_GatChannel(benchmark::State& state) {
    auto fx = Fixture::make();
    auto features = project_features(fx.windows[0], fx.params.structure, fx.params.schema);
    const std::size_t L = fx.params.schema.size();
    auto adj = ad::Tensor::full({L, L}, 1.0);
    for (auto _ : state) {
        auto h = gat_channel(features, adj, fx.params.gat_hybrid);
        benchmark::DoNotOptimize(h->values.data());
    }
}
BENCHMARK(BM_GatChannel);

void BM_ScoreWindow(benchmark::State& state) {
    auto data = synth_generate(bench_synth(600, 200), 7);
    const auto norm = fit_normalizer(data.train);
    auto train = apply_normalizer(data.train, norm);
    auto test = apply_normalizer(data.test, norm);
    ModelDims dims;
    std::mt19937_64 rng(1);
    auto params = ModelParams::init(train.schema, dims, {}, rng);
    auto calib = calibrate(params, train);
    for (auto _ : state) {
        auto s = score(params, calib, test);
        benchmark::DoNotOptimize(s.scores.data());
    }
}
BENCHMARK(BM_ScoreWindow);

}  // namespace

BENCHMARK_MAIN();
