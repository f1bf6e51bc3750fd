// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

// Gradient-check fixtures shared by the unit tests and the acceptance run.

#ifndef SEGRAVIR_TESTS_GRAD_FIXTURES_HPP_
#define SEGRAVIR_TESTS_GRAD_FIXTURES_HPP_

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "segravir/grad_check.hpp"
#include "segravir/losses.hpp"
#include "segravir/ops.hpp"

namespace segravir::fixtures {

struct GradFixture {
  std::string name;
  ScalarFunction fn;
  std::vector<Tensor> inputs;
};

// Sum of x * fixed random weights, so every output coordinate matters.
inline Tensor project(const Tensor& x, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  return ops::sum(ops::mul(x, oracle::random_tensor(x.shape(), gen)));
}

// Values bounded away from zero so ReLU kinks are never probed.
inline Tensor away_from_zero(Shape shape, std::mt19937_64& gen) {
  Tensor t = oracle::random_tensor(std::move(shape), gen, 0.1, 1.0, true);
  std::bernoulli_distribution sign(0.5);
  for (double& v : t.mutable_data()) v = sign(gen) ? v : -v;
  return t;
}

inline std::vector<GradFixture> op_fixtures() {
  std::vector<GradFixture> out;
  std::mt19937_64 gen(20260101);
  auto rt = [&](Shape s) { return oracle::random_tensor(std::move(s), gen, -1, 1, true); };

  struct ConvCase { std::size_t n, c, h, w, f, k; int stride, pad; bool bias; };
  const ConvCase convs[] = {{1, 1, 5, 5, 1, 3, 1, 1, true},  {2, 2, 6, 6, 3, 3, 1, 1, true},
                            {1, 3, 7, 5, 2, 3, 2, 1, false}, {2, 2, 8, 8, 2, 1, 1, 0, true},
                            {1, 2, 6, 6, 4, 2, 2, 0, true},  {1, 1, 9, 7, 2, 5, 1, 2, false}};
  for (const ConvCase& c : convs) {
    const bool bias = c.bias;
    const int stride = c.stride, pad = c.pad;
    const std::uint64_t seed = gen();
    out.push_back({"conv2d " + to_string(Shape{c.n, c.c, c.h, c.w}) + " k" +
                       std::to_string(c.k) + " s" + std::to_string(stride),
                   [=](const std::vector<Tensor>& in) {
                     return project(ops::conv2d(in[0], in[1], bias ? in[2] : Tensor(),
                                                stride, pad), seed);
                   },
                   {rt({c.n, c.c, c.h, c.w}), rt({c.f, c.c, c.k, c.k}), rt({c.f})}});
  }
  struct TrCase { std::size_t n, c, h, w, f; int s; };
  for (const TrCase& c : {TrCase{1, 2, 3, 3, 2, 2}, TrCase{2, 3, 2, 4, 1, 2},
                          TrCase{1, 1, 2, 2, 3, 3}, TrCase{2, 2, 3, 2, 2, 2}}) {
    const int s = c.s;
    const std::uint64_t seed = gen();
    out.push_back({"transposed_conv2d " + to_string(Shape{c.n, c.c, c.h, c.w}),
                   [=](const std::vector<Tensor>& in) {
                     return project(ops::transposed_conv2d(in[0], in[1], in[2], s), seed);
                   },
                   {rt({c.n, c.c, c.h, c.w}),
                    rt({c.c, c.f, std::size_t(s), std::size_t(s)}), rt({c.f})}});
  }
  for (const Shape& s : {Shape{2, 3, 3, 3}, Shape{4, 2, 2, 3}, Shape{3, 1, 4, 4}}) {
    const std::uint64_t seed = gen();
    auto stats = std::make_shared<ops::BatchNormStats>(ops::BatchNormStats::for_channels(s[1]));
    out.push_back({"batch_norm " + to_string(s),
                   [=](const std::vector<Tensor>& in) {
                     return project(ops::batch_norm(in[0], in[1], in[2], *stats, Mode::kTrain),
                                    seed);
                   },
                   {rt(s), rt({s[1]}), rt({s[1]})}});
  }
  for (double tau : {1.0, 3.0}) {
    const std::uint64_t seed = gen();
    out.push_back({"softmax tau " + std::to_string(tau),
                   [=](const std::vector<Tensor>& in) {
                     return project(ops::softmax(in[0], 1, tau), seed);
                   },
                   {rt({2, 3, 2, 2})}});
  }
  {
    const std::uint64_t seed = gen();
    out.push_back({"relu",
                   [=](const std::vector<Tensor>& in) { return project(ops::relu(in[0]), seed); },
                   {away_from_zero({2, 3, 4}, gen)}});
  }
  {
    const std::uint64_t seed = gen();
    out.push_back({"dropout",
                   [=](const std::vector<Tensor>& in) {
                     return project(ops::dropout(in[0], 0.3, 77, Mode::kTrain), seed);
                   },
                   {rt({2, 2, 3, 3})}});
  }
  {
    const std::uint64_t seed = gen();
    out.push_back({"add/sub/mul/scale",
                   [=](const std::vector<Tensor>& in) {
                     return project(ops::scale(ops::mul(ops::add(in[0], in[1]),
                                                        ops::sub(in[0], in[1])), 1.7),
                                    seed);
                   },
                   {rt({3, 4}), rt({3, 4})}});
  }
  out.push_back({"mean/weighted_sum",
                 [](const std::vector<Tensor>& in) {
                   const Tensor sq = ops::mul(in[0], in[0]);
                   return ops::weighted_sum({ops::mean(sq), ops::sum(in[0]), ops::mean(in[0])},
                                            {0.5, -2.0, 0.0});
                 },
                 {rt({5, 3})}});
  {
    const std::uint64_t seed = gen();
    out.push_back({"conv->relu->bn chain",
                   [=](const std::vector<Tensor>& in) {
                     ops::BatchNormStats st = ops::BatchNormStats::for_channels(2);
                     const Tensor c = ops::conv2d(in[0], in[1], Tensor(), 1, 1);
                     return project(ops::batch_norm(ops::relu(c), in[2], in[3], st, Mode::kTrain),
                                    seed);
                   },
                   {oracle::random_tensor({2, 1, 4, 4}, gen, 0.1, 1.0, true),
                    oracle::random_tensor({2, 1, 3, 3}, gen, 0.1, 1.0, true), rt({2}),
                    rt({2})}});
  }
  return out;
}

inline std::vector<std::uint8_t> random_labels(std::size_t count, int classes,
                                               std::mt19937_64& gen) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<std::uint8_t> out(count);
  for (auto& v : out) v = static_cast<std::uint8_t>(d(gen));
  return out;
}

inline Tensor random_mask_tensor(std::size_t n, std::size_t h, std::size_t w,
                                 std::mt19937_64& gen) {
  std::bernoulli_distribution keep(0.7);
  std::vector<double> v(n * h * w);
  for (double& x : v) x = keep(gen) ? 1.0 : 0.0;
  v[0] = 1.0;
  return Tensor({n, 1, h, w}, std::move(v));
}

inline std::vector<GradFixture> loss_fixtures() {
  std::vector<GradFixture> out;
  std::mt19937_64 gen(20260202);
  struct Case { std::size_t n, k, h, w; bool masked; };
  const Case cases[] = {{1, 2, 3, 3, false}, {2, 3, 2, 3, false}, {2, 3, 3, 3, true},
                        {1, 3, 4, 2, true}};
  for (const Case& c : cases) {
    const Tensor target = one_hot(random_labels(c.n * c.h * c.w, int(c.k), gen), c.n, c.k, c.h, c.w);
    const Tensor mask = c.masked ? random_mask_tensor(c.n, c.h, c.w, gen) : Tensor();
    const std::string tag = to_string(Shape{c.n, c.k, c.h, c.w}) + (c.masked ? " masked" : "");
    const Tensor logits = oracle::random_tensor({c.n, c.k, c.h, c.w}, gen, -2, 2, true);
    out.push_back({"dice " + tag,
                   [=](const std::vector<Tensor>& in) {
                     return dice_loss(ops::softmax(in[0], 1), target, mask);
                   },
                   {logits}});
    out.push_back({"cross_entropy " + tag,
                   [=](const std::vector<Tensor>& in) {
                     return cross_entropy_loss(ops::softmax(in[0], 1), target, mask);
                   },
                   {logits}});
    const Tensor teacher = oracle::random_tensor({c.n, c.k, c.h, c.w}, gen, -2, 2);
    for (double tau : {1.0, 3.0}) {
      out.push_back({"kl tau " + std::to_string(int(tau)) + " " + tag,
                     [=](const std::vector<Tensor>& in) {
                       return kl_divergence(soften(teacher, tau), soften(in[0], tau), mask);
                     },
                     {logits}});
    }
    LossWeights w{0.7, 1.3, 0.05, 3.0, 0.25};
    const Tensor image = oracle::random_tensor({c.n, 2, c.h, c.w}, gen, 0, 1);
    out.push_back({"hybrid " + tag,
                   [=](const std::vector<Tensor>& in) {
                     return hybrid_loss(in[0], target, image, in[1], w, mask).total;
                   },
                   {logits, oracle::random_tensor({c.n, 2, c.h, c.w}, gen, 0, 1, true)}});
    out.push_back({"distillation " + tag,
                   [=](const std::vector<Tensor>& in) {
                     return distillation_loss(in[0], teacher, target, w, mask).total;
                   },
                   {logits}});
  }
  {
    const Tensor image = oracle::random_tensor({1, 3, 3, 3}, gen, 0, 1);
    out.push_back({"l2_recon",
                   [=](const std::vector<Tensor>& in) { return l2_recon_loss(image, in[0]); },
                   {oracle::random_tensor({1, 3, 3, 3}, gen, 0, 1, true)}});
  }
  return out;
}

}  // namespace segravir::fixtures

#endif  // SEGRAVIR_TESTS_GRAD_FIXTURES_HPP_
