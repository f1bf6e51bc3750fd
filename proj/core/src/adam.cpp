// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/adam.hpp"

#include <cmath>

#include "segravir/error.hpp"

namespace segravir {

void adam_step(NamedParameters& params, AdamState& state, double lr) {
  for (auto& [name, param] : params) {
    for (double g : param.grad()) {
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient in parameter '" + name + "'");
      }
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, param] : params) {
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.size() != param.numel()) m.assign(param.numel(), 0.0);
    if (v.size() != param.numel()) v.assign(param.numel(), 0.0);
    std::span<const double> grad = param.grad();
    std::span<double> theta = param.mutable_data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void zero_grads(NamedParameters& params) {
  for (auto& [name, param] : params) param.zero_grad();
}

}  // namespace segravir
