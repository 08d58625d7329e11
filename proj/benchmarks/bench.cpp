#include <benchmark/benchmark.h>

#include "bdpo/contour.hpp"
#include "bdpo/losses.hpp"
#include "bdpo/policy.hpp"

namespace {

const bdpo::PairPoint kPoint{0.35, 0.08, 0.4, 0.1};

void BM_LossEval(benchmark::State& state) {
    const bdpo::LossSpec specs[] = {bdpo::LossSpec::dpo(0.1), bdpo::LossSpec::dpop(0.1, 5.0),
                                    bdpo::LossSpec::dpo_nll(0.1, 1.0),
                                    bdpo::LossSpec::bdpo(0.1, 0.5)};
    const bdpo::LossSpec& spec = specs[state.range(0)];
    for (auto _ : state) benchmark::DoNotOptimize(bdpo::loss(kPoint, spec));
}
BENCHMARK(BM_LossEval)->DenseRange(0, 3);

void BM_AnalyticGradient(benchmark::State& state) {
    const bdpo::LossSpec spec = bdpo::LossSpec::bdpo(0.1, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(bdpo::analytic_gradient(kPoint, spec));
}
BENCHMARK(BM_AnalyticGradient);

void BM_GridEvaluation(benchmark::State& state) {
    const std::size_t res = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto grid = bdpo::evaluate_grid(bdpo::LossSpec::bdpo(0.1, 0.5), {0.4, 0.1},
                                        {0.005, 0.995}, {0.0, 0.5}, {res, res}, false);
        benchmark::DoNotOptimize(grid.values.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(res * res));
}
BENCHMARK(BM_GridEvaluation)->Arg(50)->Arg(200);

void BM_MlpForwardBackprop(benchmark::State& state) {
    bdpo::MlpPolicy policy(4, 4, 7);
    std::vector<double> dloss{-(1.0 / 0.3), 0.5 / 0.1, 0.0, 0.0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(policy.forward(0));
        auto grad = policy.backprop(0, dloss);
        benchmark::DoNotOptimize(grad.w1.data.data());
    }
}
BENCHMARK(BM_MlpForwardBackprop);

}  // namespace

BENCHMARK_MAIN();
