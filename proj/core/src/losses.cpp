// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "segravir/error.hpp"
#include "segravir/ops.hpp"

namespace segravir {

namespace {

using NodePtr = std::shared_ptr<detail::Node>;

struct PixelLayout {
  std::size_t batch, classes, area;
};

PixelLayout check_pair(const Tensor& probs, const Tensor& target,
                       const Tensor& mask, const char* name) {
  if (!probs.defined() || !target.defined()) {
    throw InvalidArgument(std::string(name) + ": undefined input");
  }
  if (probs.rank() != 4) {
    throw InvalidArgument(std::string(name) + ": expected [N,K,H,W], got " +
                          to_string(probs.shape()));
  }
  if (probs.shape() != target.shape()) {
    throw InvalidArgument(std::string(name) + ": shape mismatch " +
                          to_string(probs.shape()) + " vs target " +
                          to_string(target.shape()));
  }
  if (probs.numel() == 0) {
    throw InvalidArgument(std::string(name) + ": empty tensor");
  }
  PixelLayout layout{probs.dim(0), probs.dim(1), probs.dim(2) * probs.dim(3)};
  if (mask.defined()) {
    const Shape expected{layout.batch, 1, probs.dim(2), probs.dim(3)};
    if (mask.shape() != expected) {
      throw InvalidArgument(std::string(name) + ": mask shape " +
                            to_string(mask.shape()) + ", expected " +
                            to_string(expected));
    }
  }
  return layout;
}

double mask_at(const Tensor& mask, std::size_t n, std::size_t v,
               std::size_t area) {
  return mask.defined() ? mask.data()[n * area + v] : 1.0;
}

// Scalar output node with a hand-written gradient w.r.t. a single input.
Tensor scalar_with_grad(double value, const Tensor& wrt,
                        std::vector<double> local_grad) {
  auto node = std::make_shared<detail::Node>();
  node->data = {value};
  if (grad_enabled() && wrt.requires_grad()) {
    node->requires_grad = true;
    node->parents.push_back(wrt.node());
    NodePtr parent = wrt.node();
    node->backward_fn = [parent, g = std::move(local_grad)](detail::Node& self) {
      std::vector<double>& d = parent->ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[0] * g[i];
    };
  }
  return Tensor::from_node(std::move(node));
}

}  // namespace

void LossWeights::validate() const {
  auto non_negative = [](double v, const char* field) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(std::string("loss weight ") + field +
                            " must be finite and >= 0, got " +
                            std::to_string(v));
    }
  };
  non_negative(lambda1, "lambda1");
  non_negative(lambda2, "lambda2");
  non_negative(lambda3, "lambda3");
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("tau must be > 0, got " + std::to_string(tau));
  }
  if (!(lambda_d >= 0.0 && lambda_d <= 1.0)) {
    throw InvalidArgument("lambda_D must lie in [0, 1], got " +
                          std::to_string(lambda_d));
  }
}

Tensor one_hot(std::span<const std::uint8_t> labels, std::size_t batch,
               std::size_t classes, std::size_t height, std::size_t width) {
  const std::size_t area = height * width;
  if (labels.size() != batch * area) {
    throw InvalidArgument("one_hot: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(batch) + "x" +
                          std::to_string(height) + "x" + std::to_string(width));
  }
  std::vector<double> out(batch * classes * area, 0.0);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t v = 0; v < area; ++v) {
      const std::size_t k = labels[n * area + v];
      if (k >= classes) {
        throw InvalidArgument("one_hot: label " + std::to_string(k) +
                              " out of range for " + std::to_string(classes) +
                              " classes");
      }
      out[(n * classes + k) * area + v] = 1.0;
    }
  }
  return Tensor({batch, classes, height, width}, std::move(out));
}

Tensor dice_loss(const Tensor& probs, const Tensor& target, const Tensor& mask) {
  const PixelLayout l = check_pair(probs, target, mask, "dice_loss");
  if (l.classes < 2) throw InvalidArgument("dice_loss needs K >= 2 classes");
  const double* p = probs.data().data();
  const double* g = target.data().data();

  std::vector<double> overlap(l.classes, 0.0);
  std::vector<double> denom(l.classes, 0.0);
  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t k = 0; k < l.classes; ++k) {
      const std::size_t base = (n * l.classes + k) * l.area;
      for (std::size_t v = 0; v < l.area; ++v) {
        const double w = mask_at(mask, n, v, l.area);
        overlap[k] += w * g[base + v] * p[base + v];
        denom[k] += w * (g[base + v] + p[base + v]);
      }
    }
  }
  const double k_inv = 1.0 / static_cast<double>(l.classes);
  double score = 0.0;
  for (std::size_t k = 0; k < l.classes; ++k) {
    score += (2.0 * overlap[k] + kDiceSmoothing) / (denom[k] + kDiceSmoothing);
  }
  const double value = 1.0 - k_inv * score;

  std::vector<double> grad;
  if (grad_enabled() && probs.requires_grad()) {
    grad.resize(probs.numel());
    for (std::size_t n = 0; n < l.batch; ++n) {
      for (std::size_t k = 0; k < l.classes; ++k) {
        const double num = 2.0 * overlap[k] + kDiceSmoothing;
        const double den = denom[k] + kDiceSmoothing;
        const std::size_t base = (n * l.classes + k) * l.area;
        for (std::size_t v = 0; v < l.area; ++v) {
          const double w = mask_at(mask, n, v, l.area);
          grad[base + v] =
              -k_inv * w * (2.0 * g[base + v] * den - num) / (den * den);
        }
      }
    }
  }
  return scalar_with_grad(value, probs, std::move(grad));
}

Tensor cross_entropy_loss(const Tensor& probs, const Tensor& target,
                          const Tensor& mask) {
  const PixelLayout l = check_pair(probs, target, mask, "cross_entropy_loss");
  const double* p = probs.data().data();
  const double* g = target.data().data();
  double pixels = 0.0;
  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t v = 0; v < l.area; ++v) pixels += mask_at(mask, n, v, l.area);
  }
  if (pixels == 0.0) {
    throw InvalidArgument("cross_entropy_loss: mask excludes every pixel");
  }

  double acc = 0.0;
  const bool want_grad = grad_enabled() && probs.requires_grad();
  std::vector<double> grad(want_grad ? probs.numel() : 0, 0.0);
  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t k = 0; k < l.classes; ++k) {
      const std::size_t base = (n * l.classes + k) * l.area;
      for (std::size_t v = 0; v < l.area; ++v) {
        const double w = mask_at(mask, n, v, l.area);
        const double gv = g[base + v];
        if (w == 0.0 || gv == 0.0) continue;
        const double pv = p[base + v];
        acc += w * gv * std::log(std::max(pv, kLogFloor));
        if (want_grad && pv > kLogFloor) grad[base + v] = -w * gv / (pv * pixels);
      }
    }
  }
  return scalar_with_grad(-acc / pixels, probs, std::move(grad));
}

Tensor l2_recon_loss(const Tensor& input, const Tensor& recon) {
  if (!input.defined() || !recon.defined()) {
    throw InvalidArgument("l2_recon_loss: undefined input");
  }
  if (input.shape() != recon.shape()) {
    throw InvalidArgument("l2_recon_loss: shape mismatch " +
                          to_string(input.shape()) + " vs " +
                          to_string(recon.shape()));
  }
  if (input.numel() == 0) throw InvalidArgument("l2_recon_loss: empty tensor");
  const Tensor diff = ops::sub(input, recon);
  return ops::mean(ops::mul(diff, diff));
}

Tensor kl_divergence(const Tensor& target, const Tensor& probs,
                     const Tensor& mask) {
  const PixelLayout l = check_pair(probs, target, mask, "kl_divergence");
  if (grad_enabled() && target.requires_grad()) {
    throw InvalidArgument(
        "kl_divergence: target distribution must not require a gradient");
  }
  const double* p = probs.data().data();
  const double* t = target.data().data();
  double pixels = 0.0;
  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t v = 0; v < l.area; ++v) pixels += mask_at(mask, n, v, l.area);
  }
  if (pixels == 0.0) throw InvalidArgument("kl_divergence: mask excludes every pixel");

  double acc = 0.0;
  const bool want_grad = grad_enabled() && probs.requires_grad();
  std::vector<double> grad(want_grad ? probs.numel() : 0, 0.0);
  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t k = 0; k < l.classes; ++k) {
      const std::size_t base = (n * l.classes + k) * l.area;
      for (std::size_t v = 0; v < l.area; ++v) {
        const double w = mask_at(mask, n, v, l.area);
        const double tv = t[base + v];
        if (w == 0.0 || tv <= 0.0) continue;
        const double pv = p[base + v];
        acc += w * tv * (std::log(std::max(tv, kLogFloor)) -
                         std::log(std::max(pv, kLogFloor)));
        if (want_grad && pv > kLogFloor) grad[base + v] = -w * tv / (pv * pixels);
      }
    }
  }
  return scalar_with_grad(acc / pixels, probs, std::move(grad));
}

Tensor soften(const Tensor& logits, double tau) {
  if (!(tau > 0.0)) {
    throw InvalidArgument("soften: tau must be > 0, got " + std::to_string(tau));
  }
  return ops::softmax(logits, 1, tau);
}

HybridLoss hybrid_loss(const Tensor& seg_logits, const Tensor& target,
                       const Tensor& input, const Tensor& recon,
                       const LossWeights& weights, const Tensor& mask) {
  weights.validate();
  if (weights.lambda3 > 0.0 && !recon.defined()) {
    throw InvalidArgument(
        "hybrid_loss: lambda3 > 0 requires the auxiliary reconstruction");
  }
  const Tensor probs = ops::softmax(seg_logits, 1, 1.0);
  HybridLoss out;
  std::vector<Tensor> terms;
  std::vector<double> lambdas;
  if (weights.lambda1 > 0.0) {
    terms.push_back(dice_loss(probs, target, mask));
    lambdas.push_back(weights.lambda1);
    out.dice = terms.back().item();
  }
  if (weights.lambda2 > 0.0) {
    terms.push_back(cross_entropy_loss(probs, target, mask));
    lambdas.push_back(weights.lambda2);
    out.cross_entropy = terms.back().item();
  }
  if (recon.defined()) {
    const Tensor l2 = l2_recon_loss(input, recon);
    out.l2 = l2.item();
    if (weights.lambda3 > 0.0) {
      terms.push_back(l2);
      lambdas.push_back(weights.lambda3);
    }
  }
  out.total = ops::weighted_sum(terms, lambdas);
  return out;
}

DistillationLoss distillation_loss(const Tensor& student_logits,
                                   const Tensor& teacher_logits,
                                   const Tensor& target,
                                   const LossWeights& weights,
                                   const Tensor& mask) {
  weights.validate();
  if (teacher_logits.requires_grad()) {
    throw InvalidArgument(
        "distillation_loss: teacher logits must not require a gradient");
  }
  if (student_logits.shape() != teacher_logits.shape()) {
    throw InvalidArgument("distillation_loss: student " +
                          to_string(student_logits.shape()) + " vs teacher " +
                          to_string(teacher_logits.shape()));
  }
  DistillationLoss out;
  std::vector<Tensor> terms;
  std::vector<double> lambdas;
  if (weights.lambda_d > 0.0) {
    Tensor soft_teacher;
    {
      NoGradGuard no_grad;
      soft_teacher = soften(teacher_logits, weights.tau);
    }
    terms.push_back(
        kl_divergence(soft_teacher, soften(student_logits, weights.tau), mask));
    lambdas.push_back(weights.lambda_d * weights.tau * weights.tau);
    out.kl = terms.back().item();
  }
  if (weights.lambda_d < 1.0) {
    terms.push_back(cross_entropy_loss(ops::softmax(student_logits, 1, 1.0),
                                       target, mask));
    lambdas.push_back(1.0 - weights.lambda_d);
    out.cross_entropy = terms.back().item();
  }
  out.total = ops::weighted_sum(terms, lambdas);
  return out;
}

}  // namespace segravir
