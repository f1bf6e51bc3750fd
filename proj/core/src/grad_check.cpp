// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace segravir {

GradCheckResult grad_check(const ScalarFunction& fn,
                           const std::vector<Tensor>& inputs, double probe_eps) {
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(t.clone(t.requires_grad()));

  fn(leaves).backward();
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : leaves) {
    analytic.emplace_back(t.numel(), 0.0);
    if (t.has_grad()) {
      std::copy(t.grad().begin(), t.grad().end(), analytic.back().begin());
    }
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    if (!leaves[k].requires_grad()) continue;
    std::span<double> x = leaves[k].mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + probe_eps;
      const double plus = fn(leaves).item();
      x[i] = saved - probe_eps;
      const double minus = fn(leaves).item();
      x[i] = saved;
      const double numeric = (plus - minus) / (2.0 * probe_eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.probes;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_input = k;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace segravir
