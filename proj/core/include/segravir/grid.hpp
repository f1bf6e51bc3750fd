// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_GRID_HPP_
#define SEGRAVIR_GRID_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

namespace segravir {

// Row-major H x W raster.
template <typename T>
struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(std::size_t h, std::size_t w, T fill = T{})
      : height(h), width(w), values(h * w, fill) {}

  T& operator()(std::size_t i, std::size_t j) { return values[i * width + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return values[i * width + j];
  }
  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  bool same_shape(const auto& other) const {
    return height == other.height && width == other.width;
  }

  bool operator==(const Grid&) const = default;
};

enum class VesselClass { kArtery, kVein, kVessel };

const char* to_string(VesselClass tag);

struct BinaryMask : Grid<std::uint8_t> {
  VesselClass tag = VesselClass::kVessel;

  BinaryMask() = default;
  BinaryMask(std::size_t h, std::size_t w,
             VesselClass t = VesselClass::kVessel)
      : Grid<std::uint8_t>(h, w, 0), tag(t) {}

  std::size_t count() const {
    std::size_t n = 0;
    for (std::uint8_t v : values) n += v != 0;
    return n;
  }
};

// Per-pixel class probabilities, [K, H, W].
struct ProbabilityMap {
  std::size_t classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double& at(std::size_t k, std::size_t i, std::size_t j) {
    return values[(k * height + i) * width + j];
  }
  double at(std::size_t k, std::size_t i, std::size_t j) const {
    return values[(k * height + i) * width + j];
  }
  Grid<double> channel(std::size_t k) const;
};

}  // namespace segravir

#endif  // SEGRAVIR_GRID_HPP_
