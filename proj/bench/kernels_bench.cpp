// OpenMP kernels against their serial references.
//
//   build/bench/camo_bench --benchmark_filter=cdc3d

#include <benchmark/benchmark.h>

#include "camo/cdc3d.hpp"
#include "camo/taa.hpp"

using namespace camo;

namespace {

struct ConvInput {
    Tensor5 x;
    ConvSpec3D spec;
};

ConvInput conv_input(std::size_t c, std::size_t hw) {
    return {gaussian_init({1, c, 5, hw, hw}, 1), make_conv_spec(gaussian_init({c, c, 3, 3, 3}, 2))};
}

template <Tensor5 (*Kernel)(const Tensor5&, const ConvSpec3D&)>
void BM_conv(benchmark::State& state) {
    const ConvInput in = conv_input(static_cast<std::size_t>(state.range(0)),
                                    static_cast<std::size_t>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(in.x, in.spec));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.x.size()));
}

template <Tensor5 (*Kernel)(const Tensor5&, const OffsetField&, std::size_t)>
void BM_deform(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const auto hw = static_cast<std::size_t>(state.range(1));
    const Tensor5 fs = gaussian_init({1, c, 5, hw, hw}, 3);
    OffsetField off{gaussian_init({1, 18, 5, hw, hw}, 4)};
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(fs, off, 9));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(fs.size()));
}

void conv_args(benchmark::internal::Benchmark* b) {
    b->Args({8, 64})->Args({16, 32})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_conv<conv3d>)->Name("conv3d/parallel")->Apply(conv_args);
BENCHMARK(BM_conv<serial::conv3d>)->Name("conv3d/serial")->Apply(conv_args);
BENCHMARK(BM_conv<cdc3d_forward_unified>)->Name("cdc3d_unified/parallel")->Apply(conv_args);
BENCHMARK(BM_conv<serial::cdc3d_forward_unified>)->Name("cdc3d_unified/serial")->Apply(conv_args);
BENCHMARK(BM_conv<cdc3d_forward_fusion>)->Name("cdc3d_fusion/parallel")->Apply(conv_args);
BENCHMARK(BM_conv<serial::cdc3d_forward_fusion>)->Name("cdc3d_fusion/serial")->Apply(conv_args);
BENCHMARK(BM_deform<deform_sample>)->Name("deform_sample/parallel")->Apply(conv_args);
BENCHMARK(BM_deform<serial::deform_sample>)->Name("deform_sample/serial")->Apply(conv_args);

BENCHMARK_MAIN();
