// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_RNG_HPP_
#define SEGRAVIR_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace segravir {

// Stateless seed derivation so independent streams (per parameter, per layer,
// per sample) never depend on consumption order elsewhere.
std::uint64_t mix_seed(std::uint64_t value);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> parts);

// mt19937_64 with hand-rolled draws: the standard distributions are not
// specified bit-for-bit across library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace segravir

#endif  // SEGRAVIR_RNG_HPP_
