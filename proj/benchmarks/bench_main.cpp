#include <benchmark/benchmark.h>

#include <random>

#include "mmft/losses.hpp"
#include "mmft/metrics.hpp"
#include "mmft/mft.hpp"
#include "mmft/model.hpp"
#include "mmft/ops.hpp"
#include "mmft/trainer.hpp"

using namespace mmft;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, Real lo = -1, Real hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> u(lo, hi);
  std::vector<Real> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

void BM_Conv2d3x3(benchmark::State& state) {
  const auto c = state.range(0), s = state.range(1);
  const Tensor x = random_tensor({c, s, s}, 1), w = random_tensor({c, c, 3, 3}, 2), b = random_tensor({c}, 3);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * c * c * 9 * s * s);
}
BENCHMARK(BM_Conv2d3x3)->Args({16, 176})->Args({64, 44})->Args({128, 11});

void BM_GroupedDynamicFilter(benchmark::State& state) {
  const Tensor x = random_tensor({128, 11, 11}, 4), f = random_tensor({8, 11, 11, 3, 3}, 5);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(apply_grouped_dynamic_filter(x, f));
}
BENCHMARK(BM_GroupedDynamicFilter);

void BM_TransformerLayer(benchmark::State& state) {
  MftConfig cfg;
  ParameterStore store;
  Rng rng(6);
  const auto layer = TransformerLayerParams::create(store, "layer", cfg, rng);
  const Tensor tokens = random_tensor({121, 384}, 7);
  const Tensor pos = positional_encoding(11, 11, 384);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(transformer_layer(tokens, pos, layer, cfg));
}
BENCHMARK(BM_TransformerLayer)->Unit(benchmark::kMillisecond);

void BM_ModelForward(benchmark::State& state) {
  const auto size = state.range(0);
  ModelConfig cfg = size == 352 ? ModelConfig{} : ModelConfig::reduced(size);
  cfg.finalize();
  Model model(cfg);
  const Tensor rgb = random_tensor({3, size, size}, 8, 0, 1);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(rgb));
}
BENCHMARK(BM_ModelForward)->Arg(64)->Arg(352)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto size = state.range(0);
  ModelConfig cfg = size == 352 ? ModelConfig{} : ModelConfig::reduced(size);
  cfg.finalize();
  Model model(cfg);
  Adam adam(model.parameters(), {});
  const auto data = synthetic_dataset(1, size, 9);
  TrainConfig tc;
  tc.input_size = size;
  tc.batch = 1;
  tc.augment = false;
  for (auto _ : state) benchmark::DoNotOptimize(train_step(model, adam, data, tc));
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(352)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_SaliencyMetrics(benchmark::State& state) {
  const Tensor p = random_tensor({1, 352, 352}, 10, 0, 1);
  std::vector<Real> g(352 * 352, 0.0);
  for (int r = 100; r < 250; ++r)
    for (int c = 80; c < 260; ++c) g[r * 352 + c] = 1.0;
  const Tensor gt(Shape{1, 352, 352}, g);
  for (auto _ : state) benchmark::DoNotOptimize(saliency_metrics(p, gt));
}
BENCHMARK(BM_SaliencyMetrics)->Unit(benchmark::kMillisecond);

void BM_TotalLoss(benchmark::State& state) {
  const auto sample = synthetic_dataset(1, 352, 11).front();
  SideOutputs side;
  for (std::size_t l = 0; l < kNumLevels; ++l)
    for (std::size_t t = 0; t < kNumTasks; ++t) side.maps[l][t] = sigmoid(random_tensor({1, 352, 352}, 12 + l * 3 + t));
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(side, sample).total_value);
}
BENCHMARK(BM_TotalLoss)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
