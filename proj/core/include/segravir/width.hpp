// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_WIDTH_HPP_
#define SEGRAVIR_WIDTH_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "segravir/grid.hpp"

namespace segravir {

inline constexpr double kDefaultPixelSizeMicrons = 12.5;
inline constexpr double kProbabilityThreshold = 0.5;

// Pixel is set iff prob[k] >= 0.5.
BinaryMask threshold_mask(const ProbabilityMap& prob, std::size_t k,
                          VesselClass tag = VesselClass::kVessel);

struct WidthSummary {
  std::size_t n = 0;  // number of diameter samples
  double mean_um = 0.0;
  double std_um = 0.0;  // population standard deviation; 0 when n == 0
};

struct WidthMap {
  VesselClass tag = VesselClass::kVessel;
  double pixel_size_microns = kDefaultPixelSizeMicrons;
  // Distance to the medial axis times the vessel mask, in microns.
  Grid<double> microns;
  BinaryMask skeleton;
  // One diameter estimate (microns) per sampled medial-axis pixel.
  std::vector<double> diameter_samples_um;
  WidthSummary summary;
};

/// Threshold -> medial axis -> distance transform -> diameters.
///
/// The per-pixel map is dist(p, skeleton) * seg(p). Diameters are sampled at
/// medial-axis pixels that are neither curve endpoints nor within one
/// inscribed radius (+2 px) of one: the local centerline direction is the
/// principal axis of skeleton pixels in a 9x9 window, and the sample is the
/// mean length of perpendicular chords through the union of foreground pixel
/// squares, taken at several offsets along the pixel's centerline segment.
/// Components with no eligible pixel (blobs, stubs) contribute one sample,
/// the minor axis of their moment-equivalent ellipse.
WidthMap width_map(const BinaryMask& seg,
                   double pixel_size_microns = kDefaultPixelSizeMicrons);

// Diameters read as 2 * (distance to the nearest background pixel) at the
// same centerline pixels width_map samples, in microns. Biased up to +1 px by
// pixel-centre quantization; kept as a cross-check of the chord estimate.
std::vector<double> skeleton_diameters(
    const BinaryMask& seg, const BinaryMask& skeleton,
    double pixel_size_microns = kDefaultPixelSizeMicrons);

WidthSummary summarize(std::span<const double> samples);
WidthSummary class_diameter_stats(const WidthMap& width);

// (1/N) sum |y - yhat| / |y|. Throws InvalidArgument on length mismatch,
// empty input, or a zero reference value.
double mape(std::span<const double> reference, std::span<const double> estimate);

}  // namespace segravir

#endif  // SEGRAVIR_WIDTH_HPP_
