// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_ADAM_HPP_
#define SEGRAVIR_ADAM_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "segravir/tensor.hpp"

namespace segravir {

struct AdamState {
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  // Keyed by parameter name; created lazily on the first update.
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
};

using NamedParameters = std::map<std::string, Tensor>;

// One bias-corrected Adam update of every parameter from its accumulated
// gradient. Parameters without a gradient buffer are treated as having a zero
// gradient. Throws NumericalError naming the first parameter whose gradient
// is non-finite; in that case nothing is modified.
void adam_step(NamedParameters& params, AdamState& state, double lr);

void zero_grads(NamedParameters& params);

}  // namespace segravir

#endif  // SEGRAVIR_ADAM_HPP_
