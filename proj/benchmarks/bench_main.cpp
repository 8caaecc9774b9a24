#include "hts/forecasters.hpp"
#include "hts/neuralnet.hpp"
#include "hts/reconcile.hpp"
#include "hts/rng.hpp"
#include "hts/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace hts;

namespace {

nn::Dataset random_batch(const nn::NetworkSpec &spec, std::size_t n, Rng &rng) {
    nn::Dataset d;
    d.exog.resize(static_cast<Index>(n), static_cast<Index>(spec.exog_dim));
    d.windows.resize(static_cast<Index>(n), static_cast<Index>(spec.window));
    d.targets.resize(static_cast<Index>(n), static_cast<Index>(spec.outputs));
    for (Index i = 0; i < d.exog.size(); ++i) d.exog.data()[i] = rng.normal();
    for (Index i = 0; i < d.windows.size(); ++i) d.windows.data()[i] = rng.normal();
    for (Index i = 0; i < d.targets.size(); ++i) d.targets.data()[i] = rng.normal();
    return d;
}

// Default NND network: F=16, K=4, H=64, window 30, 4 children.
void BM_NetworkBackward(benchmark::State &state) {
    const auto spec = nn::NetworkSpec::two_branch(8, 30, 4, 16, 4, 64);
    nn::Network net(spec);
    Rng rng(1);
    net.initialize(rng);
    const auto batch = random_batch(spec, static_cast<std::size_t>(state.range(0)), rng);
    for (auto _ : state) benchmark::DoNotOptimize(nn::backward(net, batch, 0.5));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NetworkBackward)->Arg(1)->Arg(32);

void BM_NetworkPredict(benchmark::State &state) {
    const auto spec = nn::NetworkSpec::two_branch(8, 30, 4, 16, 4, 64);
    nn::Network net(spec);
    Rng rng(2);
    net.initialize(rng);
    const auto batch = random_batch(spec, 256, rng);
    for (auto _ : state) benchmark::DoNotOptimize(nn::predict(net, batch));
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_NetworkPredict);

void BM_MinT(benchmark::State &state) {
    GeneratorSpec g;
    g.children_per_level = {static_cast<std::size_t>(state.range(0)), 4};
    g.length = 300;
    const auto data = generate(g);
    const auto S = build_summing_matrix(data.hierarchy);
    const Matrix residuals = data.panel.values.topRows(200) - data.panel.values.middleRows(1, 200);
    const Matrix base = data.panel.values.bottomRows(28);
    for (auto _ : state) {
        const auto W = shrinkage_covariance(residuals);
        benchmark::DoNotOptimize(mint_reconcile(S, base, W.W));
    }
}
BENCHMARK(BM_MinT)->Arg(3)->Arg(10);

void BM_EtsAuto(benchmark::State &state) {
    std::vector<double> y(730);
    Rng rng(3);
    for (std::size_t t = 0; t < y.size(); ++t) {
        y[t] = 100 + 10 * std::sin(2 * M_PI * static_cast<double>(t) / 7) + rng.normal(0, 3);
    }
    for (auto _ : state) benchmark::DoNotOptimize(fit_ets_auto(y, 7));
}
BENCHMARK(BM_EtsAuto);

} // namespace

BENCHMARK_MAIN();
