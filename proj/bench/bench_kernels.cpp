#include <benchmark/benchmark.h>

#include <vector>

#include "fat/adam.hpp"
#include "fat/kernels.hpp"
#include "fat/model.hpp"

namespace {

std::vector<float> filled(std::size_t n, fat::Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
    const auto n = state.range(0);
    fat::Rng rng(1);
    auto a = filled(static_cast<std::size_t>(n * n), rng);
    auto b = filled(static_cast<std::size_t>(n * n), rng);
    std::vector<float> c(static_cast<std::size_t>(n * n));
    fat::kernels::GemmArgs g{false, false, n, n, n, false};
    for (auto _ : state) {
        if constexpr (Parallel) {
            fat::kernels::parallel::gemm(g, a.data(), b.data(), c.data());
        } else {
            fat::kernels::serial::gemm(g, a.data(), b.data(), c.data());
        }
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Gemm<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Arg(64)->Arg(256);

template <bool Parallel>
void BM_Softmax(benchmark::State& state) {
    const std::int64_t rows = 4096, cols = state.range(0);
    fat::Rng rng(2);
    auto x = filled(static_cast<std::size_t>(rows * cols), rng);
    std::vector<float> y(x.size());
    for (auto _ : state) {
        if constexpr (Parallel) {
            fat::kernels::parallel::softmax_rows(x.data(), y.data(), rows, cols);
        } else {
            fat::kernels::serial::softmax_rows(x.data(), y.data(), rows, cols);
        }
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_Softmax<false>)->Arg(16)->Arg(62);
BENCHMARK(BM_Softmax<true>)->Arg(16)->Arg(62);

// one Adam step of the default-width model on a 32-sample batch
void BM_TrainStep(benchmark::State& state) {
    fat::FatConfig cfg;
    cfg.embed_dim = state.range(0);
    cfg.depth = 2;
    cfg.channels = 16;
    auto model = fat::build_model<float>(cfg);
    std::vector<fat::Tensor<float>> params;
    for (auto& p : model.parameters()) params.push_back(p.tensor);
    fat::Adam<float> adam(params, {});
    fat::Rng rng(3);
    fat::Tensor<float> x({32, 16, 5}, filled(32 * 16 * 5, rng));
    std::vector<std::int32_t> y(32);
    for (int i = 0; i < 32; ++i) y[i] = i % 3;
    for (auto _ : state) {
        fat::Tape<float> tape;
        fat::Tensor<float> loss;
        {
            fat::TapeScope<float> scope(tape);
            loss = fat::cross_entropy(fat::fat_forward(model, x, {fat::Mode::kTrain, &rng}),
                                      std::span<const std::int32_t>(y));
        }
        adam.zero_grad();
        tape.backward(loss);
        adam.step();
    }
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
