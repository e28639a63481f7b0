#include <benchmark/benchmark.h>

#include "pulseox/model.hpp"
#include "pulseox/optim.hpp"
#include "pulseox/rng.hpp"

namespace {

using pulseox::Rng;
using pulseox::Tensor;

Tensor random_batch(std::size_t batch, const pulseox::nn::ModelConfig& cfg,
                    std::uint64_t seed) {
  Rng rng(seed);
  Tensor x({batch, cfg.seq_len, cfg.input_dim});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-0.05, 0.05);
  return x;
}

void BM_ModelForward(benchmark::State& state) {
  pulseox::nn::ModelConfig cfg;
  cfg.hidden = static_cast<std::size_t>(state.range(0));
  cfg.seed = 1;
  const auto params = pulseox::nn::ModelParams::init(cfg);
  const auto batch = static_cast<std::size_t>(state.range(1));
  const Tensor x = random_batch(batch, cfg, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pulseox::nn::model_forward(x, params));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch));
}
BENCHMARK(BM_ModelForward)
    ->Args({16, 32})
    ->Args({16, 256})
    ->Args({32, 256})
    ->Args({64, 256});

void BM_ModelTrainStep(benchmark::State& state) {
  pulseox::nn::ModelConfig cfg;
  cfg.hidden = static_cast<std::size_t>(state.range(0));
  cfg.seed = 1;
  auto params = pulseox::nn::ModelParams::init(cfg);
  auto adam = pulseox::nn::AdamState::init(params);
  const auto batch = static_cast<std::size_t>(state.range(1));
  const Tensor x = random_batch(batch, cfg, 2);
  Tensor target({batch, 1});
  target.fill(95.0);

  for (auto _ : state) {
    pulseox::nn::ForwardCache cache;
    const Tensor pred = pulseox::nn::model_forward(x, params, &cache);
    const auto mse = pulseox::nn::mse_loss(pred, target);
    const auto grads = pulseox::nn::backward(params, cache, mse.grad);
    pulseox::nn::adam_step(params, grads, adam);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch));
}
BENCHMARK(BM_ModelTrainStep)->Args({16, 32})->Args({16, 256})->Args({32, 256});

}  // namespace

BENCHMARK_MAIN();
