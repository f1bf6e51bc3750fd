// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_MORPHOLOGY_HPP_
#define SEGRAVIR_MORPHOLOGY_HPP_

#include <cstdint>
#include <limits>

#include "segravir/grid.hpp"

namespace segravir {

/// Zhang-Suen style two-subiteration parallel thinning, 8-connected
/// foreground, using the Lam-Lee-Suen (Guo-Hall) deletion conditions: a pixel
/// goes only if it has exactly one 8-crossing, 2-3 occupied neighbour pairs
/// and lies on the subiteration's side. These conditions keep 2-pixel-thick
/// diagonals and 2x2 blocks from vanishing, so the skeleton keeps the
/// 8-connected component count of the input. Runs to a fixed point, hence
/// skeletonize(skeletonize(m)) == skeletonize(m).
BinaryMask skeletonize(const BinaryMask& mask);

inline constexpr double kInfiniteDistance =
    std::numeric_limits<double>::infinity();

struct FeatureTransform {
  Grid<double> distance;       // Euclidean, in pixels
  Grid<std::int64_t> nearest;  // flat index of the nearest seed, -1 if none
};

// Exact Euclidean distance to the nearest nonzero pixel via two separable
// lower-envelope passes. Every pixel is +inf when the mask is empty.
Grid<double> distance_transform(const BinaryMask& mask);
FeatureTransform feature_transform(const BinaryMask& mask);

// 8-connected component labels (0 = background, 1..n) and the count n.
struct Components {
  Grid<std::int32_t> labels;
  std::int32_t count = 0;
};
Components label_components(const BinaryMask& mask);

// Number of 8-neighbours set in `mask` around (i, j).
int neighbour_count(const BinaryMask& mask, std::size_t i, std::size_t j);

}  // namespace segravir

#endif  // SEGRAVIR_MORPHOLOGY_HPP_
