// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_LOSSES_HPP_
#define SEGRAVIR_LOSSES_HPP_

#include <cstdint>
#include <span>

#include "segravir/tensor.hpp"

namespace segravir {

struct LossWeights {
  double lambda1 = 1.0;    // Dice
  double lambda2 = 1.0;    // cross-entropy
  double lambda3 = 0.001;  // L2 reconstruction
  double tau = 3.0;        // distillation temperature
  double lambda_d = 0.1;   // distillation mix

  // Throws InvalidArgument naming the offending field.
  void validate() const;
};

inline constexpr double kDiceSmoothing = 1e-6;
inline constexpr double kLogFloor = 1e-12;

// [N,K,H,W] one-hot encoding of per-pixel class indices (N*H*W values).
Tensor one_hot(std::span<const std::uint8_t> labels, std::size_t batch,
               std::size_t classes, std::size_t height, std::size_t width);

// Every loss below takes an optional [N,1,H,W] {0,1} pixel mask; pixels with
// mask 0 contribute nothing. An undefined mask evaluates every pixel.

// 1 - (1/K) sum_k (2 sum_v G P + eps) / (sum_v G + sum_v P + eps), with sums
// pooled over the whole batch.
Tensor dice_loss(const Tensor& probs, const Tensor& target,
                 const Tensor& mask = {});

// -(1/V) sum_v sum_k G log max(P, 1e-12), V = number of evaluated pixels.
Tensor cross_entropy_loss(const Tensor& probs, const Tensor& target,
                          const Tensor& mask = {});

// Mean squared difference over all elements.
Tensor l2_recon_loss(const Tensor& input, const Tensor& recon);

// KL(target || probs) per pixel, averaged over evaluated pixels. `target` is
// treated as a constant distribution.
Tensor kl_divergence(const Tensor& target, const Tensor& probs,
                     const Tensor& mask = {});

// softmax(logits / tau) over the channel axis.
Tensor soften(const Tensor& logits, double tau);

struct HybridLoss {
  Tensor total;
  double dice = 0.0;
  double cross_entropy = 0.0;
  double l2 = 0.0;
};

// lambda1*Dice + lambda2*CE + lambda3*L2 on softmax(seg_logits). `recon` may
// be undefined only when lambda3 == 0.
HybridLoss hybrid_loss(const Tensor& seg_logits, const Tensor& target,
                       const Tensor& input, const Tensor& recon,
                       const LossWeights& weights, const Tensor& mask = {});

struct DistillationLoss {
  Tensor total;
  double kl = 0.0;
  double cross_entropy = 0.0;
};

// lambda_d*tau^2*KL(soften(Z_T) || soften(Z_S)) + (1-lambda_d)*CE(softmax(Z_S), G).
// Teacher logits must not require a gradient.
DistillationLoss distillation_loss(const Tensor& student_logits,
                                   const Tensor& teacher_logits,
                                   const Tensor& target,
                                   const LossWeights& weights,
                                   const Tensor& mask = {});

}  // namespace segravir

#endif  // SEGRAVIR_LOSSES_HPP_
