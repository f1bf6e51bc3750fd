// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_PNG_IO_HPP_
#define SEGRAVIR_PNG_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

namespace segravir {

// Decoded PNG with interleaved samples. Palette and sub-byte images are
// expanded to 8 bits; alpha channels are kept.
struct RasterImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;  // 1 gray, 2 gray+alpha, 3 RGB, 4 RGBA
  int bit_depth = 8;         // 8 or 16
  std::vector<std::uint16_t> samples;

  std::uint16_t at(std::size_t i, std::size_t j, std::size_t c) const {
    return samples[(i * width + j) * channels + c];
  }
};

RasterImage read_png(const std::filesystem::path& path);

// `samples` interleaved, channels in {1, 3}; bit_depth in {8, 16}.
void write_png(const std::filesystem::path& path, std::size_t height,
               std::size_t width, std::size_t channels, int bit_depth,
               const std::vector<std::uint16_t>& samples);

}  // namespace segravir

#endif  // SEGRAVIR_PNG_IO_HPP_
