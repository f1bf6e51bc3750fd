// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_SYNTH_HPP_
#define SEGRAVIR_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segravir/dataset.hpp"

namespace segravir {

struct Point2 {
  double y = 0.0;
  double x = 0.0;
};

struct VesselSpec {
  std::uint8_t label = kArtery;  // kArtery or kVein
  // Centerline control points in pixel coordinates (pixel centres are
  // integers). Two points give a straight bar, three a quadratic Bezier,
  // more a polyline.
  std::vector<Point2> control_points;
  int width_px = 5;
};

struct SynthSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 1;  // 1 (IR-like) or 3 (colour)

  // When non-empty, rendered verbatim and `vessel_count` is ignored.
  std::vector<VesselSpec> vessels;

  std::size_t vessel_count = 4;
  int min_width_px = 3;
  int max_width_px = 7;
  double artery_fraction = 0.5;
  std::uint64_t texture_seed = 0;
  double noise_level = 0.02;  // Gaussian sigma on [0,1] intensities
  int margin_px = 2;          // min background gap between vessels
  int max_attempts = 500;     // per vessel

  // Throws InvalidArgument naming the offending field.
  void validate() const;
};

struct VesselTruth {
  std::size_t index = 0;
  std::uint8_t label = kArtery;
  int width_px = 0;
  double width_um = 0.0;
  double length_px = 0.0;  // centerline length
};

struct WidthTruth {
  std::vector<VesselTruth> vessels;
  // Centerline-length-weighted mean width per class; 0 when absent.
  double artery_mean_um = 0.0;
  double vein_mean_um = 0.0;
};

struct SynthResult {
  LabeledSample sample;
  WidthTruth truth;
  // Per-pixel vessel index + 1 (0 = background).
  Grid<std::int32_t> vessel_ids;
};

// Deterministic in (spec, seed). Intensities are quantized to n/255 so an
// 8-bit PNG roundtrip is exact. Throws DataError when a vessel cannot be
// placed within max_attempts.
SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed,
                           const std::string& id = "synth",
                           double pixel_size_microns = kDefaultPixelSizeMicrons);

// Dense polyline through the centerline (Bezier sampled at <= 0.25 px).
std::vector<Point2> centerline(const VesselSpec& vessel);

// Tab-separated: id, vessel, class, width_px, width_um, length_px.
void write_width_truth(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, WidthTruth>>& rows);
std::vector<std::pair<std::string, WidthTruth>> read_width_truth(
    const std::filesystem::path& path);

}  // namespace segravir

#endif  // SEGRAVIR_SYNTH_HPP_
