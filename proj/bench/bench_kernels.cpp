// Optimized kernels against the serial reference, plus postprocess throughput.

#include <benchmark/benchmark.h>

#include <random>

#include "fcrseg/graph.hpp"
#include "fcrseg/imgdata.hpp"
#include "fcrseg/kernels.hpp"
#include "fcrseg/postprocess.hpp"

using namespace fcrseg;

namespace {

Tensor random_tensor(int c, int h, int w, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  Tensor t(c, h, w);
  for (auto& v : t.data) v = n(rng);
  return t;
}

std::vector<float> random_weights(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d(0.0f, 0.1f);
  std::vector<float> w(n);
  for (auto& v : w) v = d(rng);
  return w;
}

// Args: channels in, channels out, side length.
template <bool Optimized>
void BM_Conv3x3Forward(benchmark::State& state) {
  const int cin = static_cast<int>(state.range(0));
  const int cout = static_cast<int>(state.range(1));
  const int side = static_cast<int>(state.range(2));
  const Tensor in = random_tensor(cin, side, side, 1);
  const auto w = random_weights(static_cast<std::size_t>(cout) * cin * 9, 2);
  const std::vector<float> b(cout, 0.0f);
  Tensor out;
  for (auto _ : state) {
    if constexpr (Optimized) kernels::conv2d_forward(in, w, b, 3, out);
    else reference::conv2d_forward(in, w, b, 3, out);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.counters["MAC/s"] = benchmark::Counter(9.0 * cin * cout * side * side * state.iterations(),
                                               benchmark::Counter::kIsRate);
}

template <bool Optimized>
void BM_Conv3x3Backward(benchmark::State& state) {
  const int cin = static_cast<int>(state.range(0));
  const int cout = static_cast<int>(state.range(1));
  const int side = static_cast<int>(state.range(2));
  const Tensor in = random_tensor(cin, side, side, 3);
  const Tensor g = random_tensor(cout, side, side, 4);
  const auto w = random_weights(static_cast<std::size_t>(cout) * cin * 9, 5);
  std::vector<float> gw(w.size()), gb(cout);
  Tensor gi;
  for (auto _ : state) {
    if constexpr (Optimized) kernels::conv2d_backward(in, w, 3, g, &gi, gw, gb);
    else reference::conv2d_backward(in, w, 3, g, &gi, gw, gb);
    benchmark::DoNotOptimize(gi.data.data());
  }
  state.counters["MAC/s"] = benchmark::Counter(18.0 * cin * cout * side * side * state.iterations(),
                                               benchmark::Counter::kIsRate);
}

template <bool Optimized>
void BM_MaxPool(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Tensor in = random_tensor(16, side, side, 6);
  Tensor out;
  std::vector<std::int32_t> am;
  for (auto _ : state) {
    if constexpr (Optimized) kernels::maxpool2_forward(in, out, am);
    else reference::maxpool2_forward(in, out);
    benchmark::DoNotOptimize(out.data.data());
  }
}

template <bool Optimized>
void BM_Upsample(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Tensor in = random_tensor(16, side / 2, side / 2, 7);
  Tensor out;
  for (auto _ : state) {
    if constexpr (Optimized) kernels::upsample2_forward(in, out);
    else reference::upsample2_forward(in, out);
    benchmark::DoNotOptimize(out.data.data());
  }
}

void BM_Postprocess(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  SynthOptions so;
  so.height = so.width = side;
  so.seed = 9;
  const LabelImage gt = synth_blobs(so).train.at(0).labels;
  const auto c = four_colorable(build_adjacency(gt, 1, true));
  if (!c) {
    state.SkipWithError("fixture is not 4-colourable");
    return;
  }
  const EmbeddingMap e = render_one_hot(gt, *c, 4);
  for (auto _ : state) benchmark::DoNotOptimize(postprocess(e).labels.size());
  state.SetItemsProcessed(state.iterations());
}

void ConvArgs(benchmark::internal::Benchmark* b) {
  b->Args({8, 8, 128})->Args({16, 16, 128})->Args({32, 32, 64})->Args({64, 64, 32});
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_Conv3x3Forward<true>)->Name("conv3x3_forward/optimized")->Apply(ConvArgs);
BENCHMARK(BM_Conv3x3Forward<false>)->Name("conv3x3_forward/reference")->Apply(ConvArgs);
BENCHMARK(BM_Conv3x3Backward<true>)->Name("conv3x3_backward/optimized")->Apply(ConvArgs);
BENCHMARK(BM_Conv3x3Backward<false>)->Name("conv3x3_backward/reference")->Apply(ConvArgs);
BENCHMARK(BM_MaxPool<true>)->Name("maxpool2/optimized")->Arg(256);
BENCHMARK(BM_MaxPool<false>)->Name("maxpool2/reference")->Arg(256);
BENCHMARK(BM_Upsample<true>)->Name("upsample2/optimized")->Arg(256);
BENCHMARK(BM_Upsample<false>)->Name("upsample2/reference")->Arg(256);
BENCHMARK(BM_Postprocess)->Name("postprocess")->Arg(512)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
