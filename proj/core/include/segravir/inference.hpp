// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_INFERENCE_HPP_
#define SEGRAVIR_INFERENCE_HPP_

#include <cstdint>
#include <vector>

#include "segravir/dataset.hpp"
#include "segravir/grid.hpp"
#include "segravir/model.hpp"

namespace segravir {

inline constexpr double kDefaultOverlap = 0.5;

// Tile origins along one axis of length `extent` (>= patch): stride
// max(1, floor(patch * (1 - overlap))), plus a final tile flush with the end.
std::vector<std::size_t> tile_origins(std::size_t extent, std::size_t patch,
                                      double overlap);

// Reflect padding without edge repetition (numpy "reflect"), applied
// repeatedly for pads longer than the image.
Image reflect_pad(const Image& image, std::size_t height, std::size_t width);

/// Softmax class probabilities [K, H, W] from eval-mode tiles.
///
/// Images smaller than the patch are reflect-padded to it and cropped back.
/// Overlapping tiles are averaged with uniform weights. A single tile that
/// covers the image reproduces a direct forward pass bit-for-bit.
ProbabilityMap sliding_window_infer(Model& model, const Image& image,
                                    std::size_t patch_size,
                                    double overlap_fraction = kDefaultOverlap);

// Per-pixel argmax over classes; ties go to the lower class index.
Grid<std::uint8_t> argmax_labels(const ProbabilityMap& prob);

// Whole-image eval forward + softmax, no tiling. Sizes must be multiples of
// the model's spatial multiple.
ProbabilityMap direct_infer(Model& model, const Image& image);

}  // namespace segravir

#endif  // SEGRAVIR_INFERENCE_HPP_
