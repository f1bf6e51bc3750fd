// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_EXPORT_HPP_
#define SEGRAVIR_EXPORT_HPP_

#include <filesystem>

#include "segravir/dataset.hpp"
#include "segravir/grid.hpp"
#include "segravir/width.hpp"

namespace segravir {

inline constexpr double kProbabilityScale = 65535.0;
inline constexpr double kWidthScale = 100.0;  // PNG units per micron

// Sidecar of an exported raster: `<png path with .txt extension>`.
std::filesystem::path sidecar_path(const std::filesystem::path& png);

/// Probability maps: 16-bit grayscale PNG of K*H rows by W columns (class k
/// occupies rows k*H .. k*H+H-1), sample = round(p * 65535). The sidecar
/// holds "key value" lines: classes, height, width, scale. An empty map is
/// written as a 1x1 zero PNG with zero dimensions in the sidecar.
void export_probability_map(const ProbabilityMap& prob,
                            const std::filesystem::path& png);
ProbabilityMap read_probability_map(const std::filesystem::path& png);

/// Width maps: 16-bit grayscale PNG, sample = round(microns * 100) clamped
/// to 65535. The sidecar holds class, pixel_size_microns, scale, height,
/// width, n, mean_um and std_um.
void export_width_artifacts(const WidthMap& width,
                            const std::filesystem::path& png);
Grid<double> read_width_map(const std::filesystem::path& png);

// Input luminance with artery pixels pure red and vein pixels pure blue.
Image overlay(const Image& image, const Grid<std::uint8_t>& labels);

}  // namespace segravir

#endif  // SEGRAVIR_EXPORT_HPP_
