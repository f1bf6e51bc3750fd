// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "segravir/inference.hpp"
#include "segravir/model.hpp"
#include "segravir/morphology.hpp"
#include "segravir/ops.hpp"

namespace segravir {
namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_data()) v = u(gen);
  return t;
}

BinaryMask random_vessels(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0, double(n));
  BinaryMask m(n, n);
  for (int v = 0; v < 12; ++v) {
    const double y0 = u(gen), x0 = u(gen), y1 = u(gen), x1 = u(gen), r = 1.5 + u(gen) / n * 4;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double dy = y1 - y0, dx = x1 - x0, len2 = dy * dy + dx * dx + 1e-9;
        const double t = std::clamp(((i - y0) * dy + (j - x0) * dx) / len2, 0.0, 1.0);
        const double ey = i - y0 - t * dy, ex = j - x0 - t * dx;
        if (ey * ey + ex * ex <= r * r) m(i, j) = 1;
      }
  }
  return m;
}

void BM_Conv2d(benchmark::State& state) {
  const std::size_t c = state.range(0), hw = state.range(1);
  const Tensor x = random_tensor({2, c, hw, hw}, 1);
  const Tensor w = random_tensor({c, c, 3, 3}, 2);
  const Tensor b = random_tensor({c}, 3);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, 1, 1));
}
BENCHMARK(BM_Conv2d)->Args({8, 64})->Args({16, 64})->Args({32, 32})->Unit(benchmark::kMillisecond);

void BM_ForwardEval(benchmark::State& state) {
  ModelConfig config;
  config.base_channels = int(state.range(0));
  Model model = build_model(config, 1);
  const Tensor x = random_tensor({1, 1, 64, 64}, 4);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, x, Mode::kEval, 0));
}
BENCHMARK(BM_ForwardEval)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_DistanceTransform(benchmark::State& state) {
  const BinaryMask m = random_vessels(state.range(0), 5);
  for (auto _ : state) benchmark::DoNotOptimize(distance_transform(m));
}
BENCHMARK(BM_DistanceTransform)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Skeletonize(benchmark::State& state) {
  const BinaryMask m = random_vessels(state.range(0), 6);
  for (auto _ : state) benchmark::DoNotOptimize(skeletonize(m));
}
BENCHMARK(BM_Skeletonize)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace segravir

BENCHMARK_MAIN();
