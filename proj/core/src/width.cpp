// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/width.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "segravir/error.hpp"
#include "segravir/morphology.hpp"

namespace segravir {

BinaryMask threshold_mask(const ProbabilityMap& prob, std::size_t k,
                          VesselClass tag) {
  if (k >= prob.classes) {
    throw InvalidArgument("threshold_mask: class " + std::to_string(k) +
                          " out of range for " + std::to_string(prob.classes) +
                          " classes");
  }
  BinaryMask mask(prob.height, prob.width, tag);
  for (std::size_t i = 0; i < prob.height; ++i) {
    for (std::size_t j = 0; j < prob.width; ++j) {
      mask(i, j) = prob.at(k, i, j) >= kProbabilityThreshold ? 1 : 0;
    }
  }
  return mask;
}

namespace {

constexpr long kDirectionRadius = 4;
constexpr double kChordStep = 1.0 / 64.0;
constexpr int kChordsPerPixel = 8;

bool inside(const BinaryMask& seg, double y, double x) {
  const long i = std::lround(y), j = std::lround(x);
  return i >= 0 && j >= 0 && i < static_cast<long>(seg.height) &&
         j < static_cast<long>(seg.width) && seg(i, j) != 0;
}

// Distance from (i, j) along (dy, dx) to where the union of foreground
// pixel squares is first left.
double half_chord(const BinaryMask& seg, double y, double x, double dy, double dx) {
  double t = 0.0;
  while (inside(seg, y + (t + kChordStep) * dy, x + (t + kChordStep) * dx)) {
    t += kChordStep;
  }
  return t + kChordStep / 2.0;
}

// Skeleton pixels that are not curve ends and sit at least one inscribed
// radius (+2 px) away from every curve end, i.e. off the end caps.
bool on_centerline(const BinaryMask& skeleton, const Grid<double>& to_endpoint,
                   double radius, std::size_t i, std::size_t j) {
  return neighbour_count(skeleton, i, j) >= 2 && to_endpoint(i, j) > radius + 2.0;
}

}  // namespace

WidthMap width_map(const BinaryMask& seg, double pixel_size_microns) {
  if (!(pixel_size_microns > 0.0)) {
    throw InvalidArgument("pixel size must be > 0 microns");
  }
  WidthMap out;
  out.tag = seg.tag;
  out.pixel_size_microns = pixel_size_microns;
  out.microns = Grid<double>(seg.height, seg.width, 0.0);
  out.skeleton = skeletonize(seg);
  if (out.skeleton.count() == 0) return out;

  const Grid<double> to_skeleton = distance_transform(out.skeleton);
  for (std::size_t k = 0; k < seg.size(); ++k) {
    if (seg.values[k]) out.microns.values[k] = to_skeleton.values[k] * pixel_size_microns;
  }

  BinaryMask background(seg.height, seg.width);
  for (std::size_t k = 0; k < seg.size(); ++k) background.values[k] = !seg.values[k];
  const Grid<double> to_background = distance_transform(background);
  const Components parts = label_components(seg);

  BinaryMask endpoints(seg.height, seg.width);
  for (std::size_t i = 0; i < seg.height; ++i) {
    for (std::size_t j = 0; j < seg.width; ++j) {
      if (out.skeleton(i, j) && neighbour_count(out.skeleton, i, j) == 1) {
        endpoints(i, j) = 1;
      }
    }
  }
  const Grid<double> to_endpoint = distance_transform(endpoints);

  // Per component: chord samples, or for blobs without a usable centerline
  // the minor axis of the moment-equivalent ellipse.
  std::vector<bool> sampled(parts.count + 1, false);
  std::vector<std::array<double, 6>> moments(parts.count + 1);
  const long H = static_cast<long>(seg.height), W = static_cast<long>(seg.width);
  for (long i = 0; i < H; ++i) {
    for (long j = 0; j < W; ++j) {
      const std::int32_t part = parts.labels(i, j);
      if (part == 0) continue;
      auto& m = moments[part];
      const double y = static_cast<double>(i), x = static_cast<double>(j);
      m[0] += 1;
      m[1] += y;
      m[2] += x;
      m[3] += y * y;
      m[4] += x * x;
      m[5] += x * y;
    }
  }
  for (long i = 0; i < H; ++i) {
    for (long j = 0; j < W; ++j) {
      if (!out.skeleton(i, j)) continue;
      const std::int32_t part = parts.labels(i, j);
      const double radius = to_background(i, j);
      if (!on_centerline(out.skeleton, to_endpoint, radius, i, j)) continue;

      // Local centerline direction: principal axis of nearby skeleton pixels.
      double n = 0, sy = 0, sx = 0, syy = 0, sxx = 0, sxy = 0;
      for (long a = std::max(0L, i - kDirectionRadius);
           a <= std::min(H - 1, i + kDirectionRadius); ++a) {
        for (long b = std::max(0L, j - kDirectionRadius);
             b <= std::min(W - 1, j + kDirectionRadius); ++b) {
          if (!out.skeleton(a, b) || parts.labels(a, b) != part) continue;
          const double y = static_cast<double>(a - i), x = static_cast<double>(b - j);
          n += 1;
          sy += y;
          sx += x;
          syy += y * y;
          sxx += x * x;
          sxy += x * y;
        }
      }
      const double cyy = syy / n - (sy / n) * (sy / n);
      const double cxx = sxx / n - (sx / n) * (sx / n);
      const double cxy = sxy / n - (sx / n) * (sy / n);
      const double theta = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
      // Normal to the principal axis (cos theta, sin theta) in (x, y).
      const double ny = std::cos(theta), nx = -std::sin(theta);
      // Chords through several points along the local centerline segment
      // owned by this pixel, so the average follows the mask area rather
      // than the pixel grid phase.
      double chord = 0.0;
      for (int m = 0; m < kChordsPerPixel; ++m) {
        const double t = (m + 0.5) / kChordsPerPixel - 0.5;
        const double y = i + t * std::sin(theta);
        const double x = j + t * std::cos(theta);
        if (!inside(seg, y, x)) continue;
        chord += half_chord(seg, y, x, ny, nx) + half_chord(seg, y, x, -ny, -nx);
      }
      chord /= kChordsPerPixel;
      out.diameter_samples_um.push_back(chord * pixel_size_microns);
      sampled[part] = true;
    }
  }
  for (std::int32_t part = 1; part <= parts.count; ++part) {
    if (sampled[part]) continue;
    const auto& m = moments[part];
    const double n = m[0];
    // Pixel squares add 1/12 to each centre-based variance.
    const double cyy = m[3] / n - (m[1] / n) * (m[1] / n) + 1.0 / 12.0;
    const double cxx = m[4] / n - (m[2] / n) * (m[2] / n) + 1.0 / 12.0;
    const double cxy = m[5] / n - (m[1] / n) * (m[2] / n);
    const double half_trace = 0.5 * (cyy + cxx);
    const double spread = std::sqrt(0.25 * (cyy - cxx) * (cyy - cxx) + cxy * cxy);
    const double minor = std::max(half_trace - spread, 0.0);
    out.diameter_samples_um.push_back(4.0 * std::sqrt(minor) * pixel_size_microns);
  }
  out.summary = summarize(out.diameter_samples_um);
  return out;
}

std::vector<double> skeleton_diameters(const BinaryMask& seg,
                                       const BinaryMask& skeleton,
                                       double pixel_size_microns) {
  if (!seg.same_shape(skeleton)) {
    throw InvalidArgument("skeleton_diameters: mask/skeleton shape mismatch");
  }
  BinaryMask background(seg.height, seg.width);
  BinaryMask endpoints(seg.height, seg.width);
  for (std::size_t i = 0; i < seg.height; ++i) {
    for (std::size_t j = 0; j < seg.width; ++j) {
      background(i, j) = seg(i, j) ? 0 : 1;
      endpoints(i, j) = skeleton(i, j) && neighbour_count(skeleton, i, j) == 1;
    }
  }
  const Grid<double> to_background = distance_transform(background);
  const Grid<double> to_endpoint = distance_transform(endpoints);
  std::vector<double> out;
  for (std::size_t i = 0; i < seg.height; ++i) {
    for (std::size_t j = 0; j < seg.width; ++j) {
      if (!skeleton(i, j) || !seg(i, j)) continue;
      const double d = to_background(i, j);
      if (std::isinf(d) || !on_centerline(skeleton, to_endpoint, d, i, j)) continue;
      out.push_back(2.0 * d * pixel_size_microns);
    }
  }
  return out;
}

WidthSummary summarize(std::span<const double> samples) {
  WidthSummary s;
  s.n = samples.size();
  if (s.n == 0) return s;
  double total = 0.0;
  for (double v : samples) total += v;
  s.mean_um = total / static_cast<double>(s.n);
  double sq = 0.0;
  for (double v : samples) sq += (v - s.mean_um) * (v - s.mean_um);
  s.std_um = std::sqrt(sq / static_cast<double>(s.n));
  return s;
}

WidthSummary class_diameter_stats(const WidthMap& width) {
  return summarize(width.diameter_samples_um);
}

double mape(std::span<const double> reference, std::span<const double> estimate) {
  if (reference.size() != estimate.size()) {
    throw InvalidArgument("mape: " + std::to_string(reference.size()) +
                          " reference values vs " +
                          std::to_string(estimate.size()) + " estimates");
  }
  if (reference.empty()) throw InvalidArgument("mape: no values");
  double total = 0.0;
  for (std::size_t m = 0; m < reference.size(); ++m) {
    if (reference[m] == 0.0) {
      throw InvalidArgument("mape: reference value " + std::to_string(m) +
                            " is zero");
    }
    total += std::abs((reference[m] - estimate[m]) / reference[m]);
  }
  return total / static_cast<double>(reference.size());
}

}  // namespace segravir
