// Microbenchmarks for the contraction engine and the compressed layers.
// Wall times here are machine-specific; the analytic multiply counts from
// the costs module are the portable comparison numbers.
#include <benchmark/benchmark.h>

#include <random>

#include "btnet/layers.hpp"
#include "btnet/tensor.hpp"

namespace {

using namespace btnet;

DenseTensor randn(Shape shape, std::uint64_t seed) {
    DenseTensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : t.buffer()) v = gauss(rng);
    return t;
}

const LayerGeometry kMnistGeom{{5, 5, 8, 4}, {5, 5, 5, 4}};
const LayerGeometry kImagenetGeom{{10, 10, 8, 8}, {8, 8, 8, 8}};

void BM_Contract(benchmark::State& state) {
    const std::size_t n = state.range(0);
    DenseTensor a = randn({n, n, n}, 1), b = randn({n, n, n}, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(contract(a, b, {{1, 0}, {2, 2}}));
    }
}
BENCHMARK(BM_Contract)->Arg(8)->Arg(16)->Arg(32);

void BM_FcForward(benchmark::State& state) {
    nn::FcLayer fc("fc", kImagenetGeom.input_size(), kImagenetGeom.output_size(), 1);
    DenseTensor x = randn({std::size_t(state.range(0)), kImagenetGeom.input_size()}, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fc.forward(x, false));
    }
}
BENCHMARK(BM_FcForward)->Arg(1)->Arg(8);

void BM_BtForward(benchmark::State& state) {
    nn::BtLayer bt("bt", kImagenetGeom, std::size_t(state.range(1)), 2, 1);
    DenseTensor x = randn({std::size_t(state.range(0)), kImagenetGeom.input_size()}, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bt.forward(x, false));
    }
}
BENCHMARK(BM_BtForward)->Args({1, 1})->Args({1, 4})->Args({8, 1});

void BM_BtTrainStep(benchmark::State& state) {
    nn::BtLayer bt("bt", kMnistGeom, 1, 2, 1);
    DenseTensor x = randn({64, kMnistGeom.input_size()}, 5);
    DenseTensor g = randn({64, kMnistGeom.output_size()}, 6);
    for (auto _ : state) {
        bt.zero_grads();
        bt.forward(x, true);
        benchmark::DoNotOptimize(bt.backward(g));
    }
}
BENCHMARK(BM_BtTrainStep);

void BM_TtForward(benchmark::State& state) {
    nn::TtLayer tt("tt", kImagenetGeom, std::size_t(state.range(0)), 1);
    DenseTensor x = randn({1, kImagenetGeom.input_size()}, 7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(tt.forward(x, false));
    }
}
BENCHMARK(BM_TtForward)->Arg(2)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
