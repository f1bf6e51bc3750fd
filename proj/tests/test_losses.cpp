// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "grad_fixtures.hpp"
#include "oracles.hpp"
#include "segravir/error.hpp"
#include "segravir/losses.hpp"
#include "segravir/ops.hpp"

namespace segravir {
namespace {

std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

TEST(Losses, DiceAndCrossEntropyMatchDirectFormulas) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t N = 1 + trial % 3, K = 2 + trial % 2, H = 3 + trial % 4, W = 2 + trial % 5;
    const Tensor logits = oracle::random_tensor({N, K, H, W}, gen, -3, 3);
    const Tensor probs = ops::softmax(logits, 1);
    const Tensor target = one_hot(fixtures::random_labels(N * H * W, int(K), gen), N, K, H, W);
    EXPECT_NEAR(dice_loss(probs, target).item(),
                oracle::dice_loss(vec(probs), vec(target), N, K, H * W, kDiceSmoothing), 1e-12);
    EXPECT_NEAR(cross_entropy_loss(probs, target).item(),
                oracle::cross_entropy(vec(probs), vec(target), N, K, H * W), 1e-12);
  }
}

TEST(Losses, MaskedPixelsContributeNothing) {
  std::mt19937_64 gen(12);
  const Tensor logits = oracle::random_tensor({1, 3, 2, 2}, gen);
  const Tensor probs = ops::softmax(logits, 1);
  const Tensor target = one_hot(std::vector<std::uint8_t>{0, 1, 2, 1}, 1, 3, 2, 2);
  const Tensor mask({1, 1, 2, 2}, {1, 0, 1, 0});
  // Oracle: drop pixels 1 and 3 explicitly.
  std::vector<double> p, g;
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t v : {0u, 2u}) {
      p.push_back(probs.data()[k * 4 + v]);
      g.push_back(target.data()[k * 4 + v]);
    }
  EXPECT_NEAR(cross_entropy_loss(probs, target, mask).item(), oracle::cross_entropy(p, g, 1, 3, 2),
              1e-14);
  EXPECT_NEAR(dice_loss(probs, target, mask).item(), oracle::dice_loss(p, g, 1, 3, 2, kDiceSmoothing),
              1e-14);
}

TEST(Losses, UniformPredictionCrossEntropyIsLogK) {
  const Tensor probs = ops::softmax(Tensor::zeros({2, 3, 4, 4}), 1);
  const Tensor target = one_hot(std::vector<std::uint8_t>(32, 2), 2, 3, 4, 4);
  EXPECT_NEAR(cross_entropy_loss(probs, target).item(), std::log(3.0), 1e-12);
}

TEST(Losses, PerfectPredictionIsNearZero) {
  std::mt19937_64 gen(13);
  const Tensor target = one_hot(fixtures::random_labels(2 * 25, 3, gen), 2, 3, 5, 5);
  EXPECT_LT(dice_loss(target, target).item(), 1e-6);
  EXPECT_LT(cross_entropy_loss(target, target).item(), 1e-10);
}

TEST(Losses, KlOfIdenticalDistributionsIsZeroAndMatchesDirectSum) {
  std::mt19937_64 gen(14);
  const Tensor z = oracle::random_tensor({2, 3, 3, 3}, gen, -2, 2);
  EXPECT_LT(std::abs(kl_divergence(soften(z, 3.0), soften(z, 3.0)).item()), 1e-12);
  const Tensor t = soften(oracle::random_tensor({2, 3, 3, 3}, gen, -2, 2), 2.0);
  const Tensor s = soften(z, 2.0);
  double direct = 0.0;
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t v = 0; v < 9; ++v)
      for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t q = (n * 3 + k) * 9 + v;
        direct += t.data()[q] * std::log(t.data()[q] / s.data()[q]);
      }
  EXPECT_NEAR(kl_divergence(t, s).item(), direct / 18.0, 1e-14);
}

TEST(Losses, HybridIsWeightedSumOfTerms) {
  std::mt19937_64 gen(15);
  const Tensor logits = oracle::random_tensor({1, 3, 4, 4}, gen);
  const Tensor target = one_hot(fixtures::random_labels(16, 3, gen), 1, 3, 4, 4);
  const Tensor image = oracle::random_tensor({1, 1, 4, 4}, gen, 0, 1);
  const Tensor recon = oracle::random_tensor({1, 1, 4, 4}, gen, 0, 1);
  const LossWeights w{0.3, 1.7, 0.01};
  const HybridLoss h = hybrid_loss(logits, target, image, recon, w);
  const Tensor p = ops::softmax(logits, 1);
  double l2 = 0.0;
  for (std::size_t i = 0; i < 16; ++i) l2 += std::pow(image.data()[i] - recon.data()[i], 2);
  l2 /= 16.0;
  EXPECT_NEAR(h.dice, oracle::dice_loss(vec(p), vec(target), 1, 3, 16, kDiceSmoothing), 1e-14);
  EXPECT_NEAR(h.cross_entropy, oracle::cross_entropy(vec(p), vec(target), 1, 3, 16), 1e-14);
  EXPECT_NEAR(h.l2, l2, 1e-14);
  EXPECT_NEAR(h.total.item(), 0.3 * h.dice + 1.7 * h.cross_entropy + 0.01 * l2, 1e-14);
  EXPECT_THROW(hybrid_loss(logits, target, image, Tensor(), w), InvalidArgument);
}

TEST(Losses, DistillationMixesKlAndCrossEntropy) {
  std::mt19937_64 gen(16);
  const Tensor zs = oracle::random_tensor({1, 2, 3, 3}, gen);
  const Tensor zt = oracle::random_tensor({1, 2, 3, 3}, gen);
  const Tensor target = one_hot(fixtures::random_labels(9, 2, gen), 1, 2, 3, 3);
  LossWeights w;
  w.tau = 3.0;
  w.lambda_d = 0.1;
  const DistillationLoss d = distillation_loss(zs, zt, target, w);
  const std::vector<double> ps = oracle::softmax(vec(zs), 1, 2, 9, 3.0);
  const std::vector<double> pt = oracle::softmax(vec(zt), 1, 2, 9, 3.0);
  double kl = 0.0;
  for (std::size_t q = 0; q < 18; ++q) kl += pt[q] * std::log(pt[q] / ps[q]);
  kl /= 9.0;
  const double ce = oracle::cross_entropy(oracle::softmax(vec(zs), 1, 2, 9), vec(target), 1, 2, 9);
  EXPECT_NEAR(d.kl, kl, 1e-14);
  EXPECT_NEAR(d.cross_entropy, ce, 1e-14);
  EXPECT_NEAR(d.total.item(), 0.1 * 9.0 * kl + 0.9 * ce, 1e-14);
}

TEST(Losses, RejectsShapeMismatch) {
  const Tensor p = Tensor::zeros({1, 3, 2, 2});
  EXPECT_THROW(dice_loss(p, Tensor::zeros({1, 2, 2, 2})), InvalidArgument);
  EXPECT_THROW(one_hot(std::vector<std::uint8_t>{0, 3, 0, 0}, 1, 3, 2, 2), InvalidArgument);
}

TEST(GradCheck, LossFixturesAgreeWithFiniteDifferences) {
  const auto all = fixtures::loss_fixtures();
  ASSERT_GE(all.size(), 20u);
  for (const auto& f : all) {
    EXPECT_LT(grad_check(f.fn, f.inputs).max_relative_error, 1e-6) << f.name;
  }
}

}  // namespace
}  // namespace segravir
