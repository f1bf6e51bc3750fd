// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "segravir/error.hpp"
#include "segravir/morphology.hpp"
#include "segravir/width.hpp"

namespace segravir {
namespace {

constexpr double kAngles[] = {0.0, 0.4636476090008061, M_PI / 4};  // 0, atan(1/2), 45 deg

TEST(Width, BarsWithinOnePixel) {
  for (int w = 3; w <= 15; ++w)
    for (double angle : kAngles)
      for (double offset : {0.0, 0.3}) {
        const BinaryMask m = oracle::bar(80, 40 + offset, 40 - offset, angle, w, 48);
        const WidthMap wm = width_map(m, 1.0);
        ASSERT_GT(wm.summary.n, 0u);
        EXPECT_LE(std::abs(wm.summary.mean_um - w), 1.0)
            << "w " << w << " angle " << angle << " offset " << offset;
      }
}

TEST(Width, DisksWithinOnePixel) {
  for (int w = 3; w <= 15; ++w)
    for (double offset : {0.0, 0.25, 0.5}) {
      const BinaryMask m = oracle::disk(40, 20 + offset, 20 + offset / 2, w);
      const WidthMap wm = width_map(m, 1.0);
      ASSERT_EQ(wm.summary.n, 1u);
      EXPECT_LE(std::abs(wm.summary.mean_um - w), 1.0) << "w " << w << " offset " << offset;
    }
}

TEST(Width, ScalesWithPixelSize) {
  const BinaryMask m = oracle::bar(64, 32, 32, 0.3, 6, 40);
  const WidthMap a = width_map(m, 1.0);
  const WidthMap b = width_map(m, 12.5);
  EXPECT_NEAR(b.summary.mean_um, 12.5 * a.summary.mean_um, 1e-9);
  EXPECT_NEAR(b.summary.std_um, 12.5 * a.summary.std_um, 1e-9);
}

TEST(Width, MapIsDistanceToSkeletonInsideMask) {
  const BinaryMask m = oracle::bar(48, 24, 24, 0.5, 7, 30);
  const WidthMap wm = width_map(m, 2.0);
  const Grid<double> d = oracle::brute_edt(wm.skeleton);
  for (std::size_t q = 0; q < m.size(); ++q) {
    EXPECT_NEAR(wm.microns.values[q], m.values[q] ? 2.0 * d.values[q] : 0.0, 1e-9);
  }
  EXPECT_EQ(wm.skeleton, skeletonize(m));
}

TEST(Width, SkeletonDiametersAgreeWithChords) {
  for (int w = 3; w <= 15; w += 2)
    for (double angle : kAngles) {
      const BinaryMask m = oracle::bar(80, 40, 40, angle, w, 48);
      const WidthMap wm = width_map(m, 1.0);
      const std::vector<double> sk = skeleton_diameters(m, wm.skeleton, 1.0);
      ASSERT_EQ(sk.size(), wm.diameter_samples_um.size());
      const WidthSummary s = summarize(sk);
      EXPECT_LE(std::abs(s.mean_um - wm.summary.mean_um), 1.0 + 1e-9) << w << " " << angle;
    }
}

TEST(Width, EmptyMaskHasNoSamples) {
  const WidthMap wm = width_map(BinaryMask(10, 10), 12.5);
  EXPECT_EQ(wm.summary.n, 0u);
  EXPECT_EQ(wm.summary.mean_um, 0.0);
  for (double v : wm.microns.values) EXPECT_EQ(v, 0.0);
}

TEST(Width, ThresholdIsInclusive) {
  ProbabilityMap p{2, 1, 3, {0.5, 0.6, 0.4, 0.5, 0.4, 0.6}};
  const BinaryMask m = threshold_mask(p, 1);
  EXPECT_EQ(m.values, (std::vector<std::uint8_t>{1, 0, 1}));
}

TEST(Summaries, PopulationStdAndMape) {
  const std::vector<double> s{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  const WidthSummary w = summarize(s);
  EXPECT_EQ(w.n, 8u);
  EXPECT_DOUBLE_EQ(w.mean_um, 5.0);
  EXPECT_DOUBLE_EQ(w.std_um, 2.0);
  EXPECT_EQ(summarize({}).std_um, 0.0);
  const std::vector<double> ref{10.0, 20.0}, est{11.0, 18.0};
  EXPECT_DOUBLE_EQ(mape(ref, est), (0.1 + 0.1) / 2.0);
  EXPECT_THROW(mape(ref, std::vector<double>{1.0}), InvalidArgument);
  EXPECT_THROW(mape(std::vector<double>{0.0}, std::vector<double>{1.0}), InvalidArgument);
}

}  // namespace
}  // namespace segravir
