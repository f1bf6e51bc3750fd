// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_GRAD_CHECK_HPP_
#define SEGRAVIR_GRAD_CHECK_HPP_

#include <cstddef>
#include <functional>
#include <vector>

#include "segravir/tensor.hpp"

namespace segravir {

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::size_t probes = 0;
};

// Compares reverse-mode gradients of fn at `inputs` with central differences
// of step probe_eps, probing every coordinate of every input that requires a
// gradient. The error per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// fn must be a pure function of its inputs (re-seed any dropout identically).
GradCheckResult grad_check(const ScalarFunction& fn,
                           const std::vector<Tensor>& inputs,
                           double probe_eps = 1e-5);

}  // namespace segravir

#endif  // SEGRAVIR_GRAD_CHECK_HPP_
