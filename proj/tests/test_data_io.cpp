// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "segravir/dataset.hpp"
#include "segravir/error.hpp"
#include "segravir/export.hpp"
#include "segravir/png_io.hpp"
#include "segravir/synth.hpp"

namespace segravir {
namespace {

namespace fs = std::filesystem;
const fs::path kData = SEGRAVIR_TEST_DATA_DIR;

class TempDir : public ::testing::Test {
 protected:
  fs::path dir;
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("segravir_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  void write(const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
  }
};

TEST(Golden, SixteenBitGrayDecodesToKnownValues) {
  const Image im = load_image(kData / "golden_gray16.png");
  ASSERT_EQ(im.channels, 1u);
  ASSERT_EQ(im.height, 5u);
  ASSERT_EQ(im.width, 7u);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 7; ++j)
      EXPECT_DOUBLE_EQ(im.at(0, i, j), double((i * 7 + j) * 1000) / 65535.0);
}

TEST(Golden, RgbaDropsAlpha) {
  const Image im = load_image(kData / "golden_rgba8.png");
  ASSERT_EQ(im.channels, 3u);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      EXPECT_DOUBLE_EQ(im.at(0, i, j), double((i * 40) % 256) / 255.0);
      EXPECT_DOUBLE_EQ(im.at(1, i, j), double((j * 30) % 256) / 255.0);
      EXPECT_DOUBLE_EQ(im.at(2, i, j), double((i * j * 9) % 256) / 255.0);
    }
  EXPECT_EQ(read_png(kData / "golden_rgba8.png").channels, 4u);
}

TEST(Golden, LabelCodec) {
  const Grid<std::uint8_t> l = load_label_png(kData / "golden_labels.png");
  Grid<std::uint8_t> want(4, 4, kBackground);
  for (std::size_t j = 0; j < 4; ++j) want(1, j) = kArtery;
  want(2, 1) = want(2, 2) = kVein;
  EXPECT_EQ(l, want);
  EXPECT_EQ(decode_labels(encode_labels(want)), want);
  Grid<std::uint8_t> bad(1, 2, 0);
  bad(0, 1) = 77;
  try {
    decode_labels(bad);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("77"), std::string::npos);
  }
}

TEST_F(TempDir, PngRoundtrips) {
  std::vector<std::uint16_t> s(3 * 4 * 3);
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = static_cast<std::uint16_t>(k * 1811);
  write_png(dir / "a.png", 3, 4, 3, 16, s);
  const RasterImage r = read_png(dir / "a.png");
  EXPECT_EQ(r.bit_depth, 16);
  EXPECT_EQ(r.samples, s);
  Image im{1, 2, 3, {0.0, 1.0, 0.5, 0.25, 10.0 / 255, 254.0 / 255}};
  save_image(im, dir / "b.png");
  const Image back = load_image(dir / "b.png");
  EXPECT_EQ(back.values[3], 64.0 / 255.0);
  EXPECT_EQ(back.values[4], 10.0 / 255.0);
  EXPECT_THROW(read_png(dir / "missing.png"), DataError);
  write("junk.png", "nope");
  EXPECT_THROW(read_png(dir / "junk.png"), DataError);
}

TEST_F(TempDir, ManifestParsesAndReportsErrors) {
  write("m.csv",
        "# pixel_size_microns=10\n\nid,image,label,mask,split\n"
        "b,ib.png,lb.png,,val\na,ia.png,la.png,ma.png,train\n");
  const DatasetManifest m = read_manifest(dir / "m.csv");
  EXPECT_EQ(m.pixel_size_microns, 10.0);
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_EQ(m.records[1].mask, "ma.png");
  EXPECT_EQ(m.records[0].split, Split::kVal);

  write("dup.csv", "id,image,label,mask,split\na,i,l,,train\na,i,l,,train\n");
  write("split.csv", "id,image,label,mask,split\na,i,l,,holdout\n");
  write("cols.csv", "id,image,label,mask,split\na,i,l\n");
  write("head.csv", "name,image\n");
  for (const char* f : {"dup.csv", "split.csv", "cols.csv", "head.csv"}) {
    try {
      read_manifest(dir / f);
      FAIL() << f;
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find(f), std::string::npos) << e.what();
    }
  }
  EXPECT_THROW(read_manifest(dir / "absent.csv"), DataError);
}

TEST_F(TempDir, DatasetRoundtripThroughSaveSample) {
  SynthSpec spec;
  spec.vessel_count = 2;
  DatasetManifest manifest;
  manifest.pixel_size_microns = 12.5;
  std::vector<LabeledSample> made;
  for (int k = 0; k < 3; ++k) {
    LabeledSample s = synth_generate(spec, 40 + k, "s" + std::to_string(2 - k)).sample;
    if (k == 1) s.eval_mask(0, 0) = 0;
    manifest.records.push_back(save_sample(s, dir, k == 2 ? Split::kVal : Split::kTrain));
    made.push_back(s);
  }
  write_manifest(manifest, dir / "manifest.csv");
  const auto train = load_dataset(dir / "manifest.csv", Split::kTrain);
  ASSERT_EQ(train.size(), 2u);
  EXPECT_EQ(train[0].id, "s1");  // sorted by id
  EXPECT_EQ(train[0].image, made[1].image);
  EXPECT_EQ(train[0].labels, made[1].labels);
  EXPECT_EQ(train[0].eval_mask, made[1].eval_mask);
  EXPECT_EQ(train[1].eval_mask, made[0].eval_mask);
  EXPECT_EQ(load_dataset(dir / "manifest.csv").size(), 3u);
  fs::remove(dir / manifest.records[0].label);
  EXPECT_THROW(load_dataset(dir / "manifest.csv"), DataError);
}

// Pixels within w/2 of segment (a, b), computed directly.
double segment_distance(double y, double x, Point2 a, Point2 b) {
  const double vy = b.y - a.y, vx = b.x - a.x;
  const double len2 = vy * vy + vx * vx;
  double t = len2 > 0 ? ((y - a.y) * vy + (x - a.x) * vx) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(y - a.y - t * vy, x - a.x - t * vx);
}

TEST(Synth, RasterizesCappedTubes) {
  SynthSpec spec;
  spec.height = spec.width = 48;
  spec.noise_level = 0.0;
  const Point2 a{10.3, 6.0}, b{35.0, 40.7};
  spec.vessels = {{kVein, {a, b}, 5}};
  const SynthResult r = synth_generate(spec, 1);
  std::size_t inside = 0, mismatches = 0;
  for (std::size_t i = 0; i < 48; ++i)
    for (std::size_t j = 0; j < 48; ++j) {
      const double d = segment_distance(double(i), double(j), a, b);
      const bool want = d <= 2.5;
      inside += want;
      if ((r.sample.labels(i, j) == kVein) != want && std::abs(d - 2.5) > 1e-9) ++mismatches;
      if (r.sample.labels(i, j) != kBackground) EXPECT_EQ(r.sample.labels(i, j), kVein);
    }
  EXPECT_EQ(mismatches, 0u);
  EXPECT_GT(inside, 100u);
  ASSERT_EQ(r.truth.vessels.size(), 1u);
  EXPECT_NEAR(r.truth.vessels[0].length_px, std::hypot(b.y - a.y, b.x - a.x), 1e-9);
  EXPECT_EQ(r.truth.vessels[0].width_um, 5 * 12.5);
  EXPECT_NEAR(r.truth.vein_mean_um, 62.5, 1e-12);
  EXPECT_EQ(r.truth.artery_mean_um, 0.0);
}

TEST(Synth, DeterministicQuantizedAndSeparated) {
  SynthSpec spec;
  spec.channels = 3;
  spec.vessel_count = 5;
  const SynthResult a = synth_generate(spec, 99);
  const SynthResult b = synth_generate(spec, 99);
  EXPECT_EQ(a.sample.image, b.sample.image);
  EXPECT_EQ(a.sample.labels, b.sample.labels);
  EXPECT_NE(synth_generate(spec, 100).sample.labels, a.sample.labels);
  for (double v : a.sample.image.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_EQ(std::round(v * 255.0) / 255.0, v);
  }
  // Distinct vessels never touch: a margin of background separates them.
  const auto& ids = a.vessel_ids;
  for (std::size_t i = 0; i + 1 < ids.height; ++i)
    for (std::size_t j = 0; j + 1 < ids.width; ++j)
      for (auto [di, dj] : {std::pair{0, 1}, {1, 0}, {1, 1}}) {
        const int p = ids(i, j), q = ids(i + di, j + dj);
        if (p && q) EXPECT_EQ(p, q);
      }
  EXPECT_EQ(a.truth.vessels.size(), 5u);
  for (const VesselTruth& v : a.truth.vessels) {
    EXPECT_GE(v.width_px, spec.min_width_px);
    EXPECT_LE(v.width_px, spec.max_width_px);
  }
}

TEST(Synth, VesselsContrastWithBackground) {
  SynthSpec spec;
  spec.noise_level = 0.0;
  spec.vessels = {{kArtery, {{10, 8}, {10, 56}}, 7}, {kVein, {{40, 8}, {40, 56}}, 7}};
  const SynthResult r = synth_generate(spec, 3);
  EXPECT_GT(r.sample.image.at(0, 10, 32), r.sample.image.at(0, 25, 32) + 0.1);
  EXPECT_LT(r.sample.image.at(0, 40, 32), r.sample.image.at(0, 25, 32) - 0.1);
}

TEST(Synth, RejectsOverlapAndBadSpecs) {
  SynthSpec spec;
  spec.vessels = {{kArtery, {{10, 8}, {10, 56}}, 5}, {kVein, {{4, 30}, {30, 30}}, 5}};
  EXPECT_THROW(synth_generate(spec, 1), DataError);
  SynthSpec crowded;
  crowded.height = crowded.width = 16;
  crowded.vessel_count = 30;
  crowded.max_attempts = 5;
  EXPECT_THROW(synth_generate(crowded, 1), DataError);
  SynthSpec bad;
  bad.min_width_px = 9;
  bad.max_width_px = 3;
  EXPECT_THROW(synth_generate(bad, 1), InvalidArgument);
}

TEST_F(TempDir, WidthTruthRoundtrip) {
  SynthSpec spec;
  const SynthResult r = synth_generate(spec, 5);
  write_width_truth(dir / "t.tsv", {{"x", r.truth}});
  const auto back = read_width_truth(dir / "t.tsv");
  ASSERT_EQ(back.size(), 1u);
  ASSERT_EQ(back[0].second.vessels.size(), r.truth.vessels.size());
  EXPECT_NEAR(back[0].second.artery_mean_um, r.truth.artery_mean_um, 1e-5);
  EXPECT_NEAR(back[0].second.vein_mean_um, r.truth.vein_mean_um, 1e-5);
}

TEST_F(TempDir, ProbabilityAndWidthExports) {
  ProbabilityMap p{2, 2, 3, {0.0, 0.25, 0.5, 0.75, 1.0, 0.1, 1.0, 0.75, 0.5, 0.25, 0.0, 0.9}};
  export_probability_map(p, dir / "p.png");
  const ProbabilityMap q = read_probability_map(dir / "p.png");
  ASSERT_EQ(q.classes, 2u);
  for (std::size_t k = 0; k < p.values.size(); ++k) {
    EXPECT_EQ(q.values[k], std::round(p.values[k] * 65535.0) / 65535.0);
  }
  EXPECT_TRUE(fs::exists(dir / "p.txt"));
  export_probability_map(ProbabilityMap{}, dir / "e.png");
  EXPECT_EQ(read_probability_map(dir / "e.png").values.size(), 0u);

  WidthMap w;
  w.microns = Grid<double>(2, 2);
  w.microns.values = {0.0, 12.345, 600.0, 1e6};
  export_width_artifacts(w, dir / "w.png");
  const Grid<double> back = read_width_map(dir / "w.png");
  EXPECT_DOUBLE_EQ(back.values[1], 12.35);
  EXPECT_DOUBLE_EQ(back.values[2], 600.0);
  EXPECT_DOUBLE_EQ(back.values[3], 655.35);
}

TEST(Export, OverlayColours) {
  Image im{1, 1, 3, {0.2, 0.4, 0.6}};
  Grid<std::uint8_t> l(1, 3, 0);
  l(0, 1) = kArtery;
  l(0, 2) = kVein;
  const Image o = overlay(im, l);
  ASSERT_EQ(o.channels, 3u);
  EXPECT_EQ(o.at(0, 0, 0), 0.2);
  EXPECT_EQ(o.at(1, 0, 0), 0.2);
  EXPECT_EQ(o.at(0, 0, 1), 1.0);
  EXPECT_EQ(o.at(1, 0, 1), 0.0);
  EXPECT_EQ(o.at(2, 0, 2), 1.0);
  EXPECT_EQ(o.at(0, 0, 2), 0.0);
}

}  // namespace
}  // namespace segravir
