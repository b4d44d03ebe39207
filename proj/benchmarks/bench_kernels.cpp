// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "plasm/detail/gemm.hpp"
#include "plasm/layers.hpp"
#include "plasm/losses.hpp"
#include "plasm/model.hpp"

using namespace plasm;

static void BM_GemmF32(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(1);
  auto a = rand_uniform<float>({n, n}, rng, -1.0, 1.0);
  auto b = rand_uniform<float>({n, n}, rng, -1.0, 1.0);
  std::vector<float> c(static_cast<size_t>(n * n));
  for (auto _ : state) {
    detail::gemm_nn(n, n, n, a.value().data(), n, b.value().data(), n, c.data(), n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_GemmF32)->Arg(128)->Arg(256)->Arg(512);

static void BM_Conv2dForward(benchmark::State& state) {
  Rng rng(2);
  auto x = rand_uniform<float>({8, 16, 32, 32}, rng);
  Conv2dT<float> conv(16, 16, 3, 1, 1, rng);
  NoGradGuard inference;
  for (auto _ : state) {
    auto y = conv.forward(x);
    benchmark::DoNotOptimize(y.value().data());
  }
}
BENCHMARK(BM_Conv2dForward);

static void BM_ConvNeXtBlock(benchmark::State& state) {
  Rng rng(3);
  auto x = rand_uniform<float>({1, 64, 16, 16}, rng);
  ConvNeXtBlockT<float> block(64, rng);
  NoGradGuard inference;
  for (auto _ : state) {
    auto y = block.forward(x);
    benchmark::DoNotOptimize(y.value().data());
  }
}
BENCHMARK(BM_ConvNeXtBlock);

static void BM_TrainingStep(benchmark::State& state) {
  ModelConfig cfg;
  cfg.height = 32;
  cfg.width = 32;
  cfg.channels = 1;
  cfg.t_in = 4;
  cfg.t_out = 4;
  cfg.enc_width = 16;
  cfg.trans_width = 64;
  cfg.enc_depth = 4;
  cfg.trans_depth = 2;
  cfg.heads = 2;
  PredictionModelT<float> model(cfg, Rng(4));
  Rng rng(5);
  auto frames = rand_uniform<float>({2, 4, 1, 32, 32}, rng);
  auto target = rand_uniform<float>({2, 4, 1, 32, 32}, rng);
  auto params = model.parameters().all();
  for (auto _ : state) {
    auto loss = loss_prediction(target, model.forward(frames));
    backward(loss);
    for (auto& [n, t] : params) t.zero_grad();
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_TrainingStep);

BENCHMARK_MAIN();
