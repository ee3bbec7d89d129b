#include <benchmark/benchmark.h>

#include <random>

#include "maskmatch/blending.hpp"
#include "maskmatch/mmc.hpp"
#include "maskmatch/toy_model.hpp"

using namespace maskmatch;

namespace {

Tensor random_tensor(const Shape& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
  std::vector<float> v(shape_size(dims));
  for (auto& x : v) x = dist(rng);
  return Tensor(dims, std::move(v));
}

BinaryGrid random_grid(std::size_t f, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> bits(f * h * w);
  for (auto& b : bits) b = rng() & 1;
  return BinaryGrid(f, h, w, std::move(bits));
}

}  // namespace

static void BM_Miou(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  const BinaryGrid a = random_grid(8, s, s, 1), b = random_grid(8, s, s, 2);
  for (auto _ : state) benchmark::DoNotOptimize(miou(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.size()));
}
BENCHMARK(BM_Miou)->Arg(64)->Arg(512);

static void BM_SoftmaxRows(benchmark::State& state) {
  const auto cells = static_cast<std::size_t>(state.range(0));
  const Tensor t = random_tensor({4, cells, cells}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_rows(t, 2));
}
BENCHMARK(BM_SoftmaxRows)->Arg(64)->Arg(256);

static void BM_BlendSelf(benchmark::State& state) {
  const std::size_t side = 16, cells = side * side, frames = 4;
  const Tensor src = softmax_rows(random_tensor({frames, cells, cells}, 4), 2);
  const Tensor edit = softmax_rows(random_tensor({frames, cells, cells}, 5), 2);
  const UnwrappedMask m = unwrap(random_grid(frames, 64, 64, 6), side, side, 0);
  for (auto _ : state) benchmark::DoNotOptimize(blend_self(src, edit, m, EditTask::kAttribute));
}
BENCHMARK(BM_BlendSelf);

static void BM_ToyPredict(benchmark::State& state) {
  const ToyDenoiser net;
  const Tensor z = random_tensor({4, 4, 16, 16}, 7);
  const TextEmbedding text = net.text_encoder().encode("a red square on a gradient");
  for (auto _ : state) benchmark::DoNotOptimize(net.predict(z, 500, text));
}
BENCHMARK(BM_ToyPredict)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
