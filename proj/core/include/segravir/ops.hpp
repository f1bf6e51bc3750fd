// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_OPS_HPP_
#define SEGRAVIR_OPS_HPP_

#include <cstdint>
#include <vector>

#include "segravir/tensor.hpp"

namespace segravir::ops {

// 2-D cross-correlation over NCHW input with an [F,C,kh,kw] kernel. `bias`
// may be undefined.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);

// Non-overlapping transposed convolution with a square [C,F,s,s] kernel,
// s == stride. Output spatial size is exactly stride times the input size.
// This is the adjoint of conv2d(., kernel, stride=s, padding=0).
Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel,
                         const Tensor& bias, int stride);

struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  static BatchNormStats for_channels(std::size_t channels);
};

// Per-channel normalization over (N,H,W). Train mode normalizes with batch
// statistics and updates `stats`; eval mode reads the running statistics.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, Mode mode);

Tensor relu(const Tensor& x);

// softmax(x / temperature) along `axis`.
Tensor softmax(const Tensor& logits, int axis, double temperature = 1.0);

// Inverted dropout; deterministic for a given seed.
Tensor dropout(const Tensor& x, double rate, std::uint64_t seed, Mode mode);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Weighted sum of scalars, w0*s0 + w1*s1 + ...; skips terms with zero weight.
Tensor weighted_sum(const std::vector<Tensor>& scalars,
                    const std::vector<double>& weights);

}  // namespace segravir::ops

#endif  // SEGRAVIR_OPS_HPP_
