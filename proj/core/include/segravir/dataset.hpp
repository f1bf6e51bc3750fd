// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_DATASET_HPP_
#define SEGRAVIR_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segravir/grid.hpp"
#include "segravir/width.hpp"

namespace segravir {

// Class indices used in label rasters.
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kArtery = 1;
inline constexpr std::uint8_t kVein = 2;

// [C, H, W] intensities in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double& at(std::size_t c, std::size_t i, std::size_t j) {
    return values[(c * height + i) * width + j];
  }
  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return values[(c * height + i) * width + j];
  }
  bool operator==(const Image&) const = default;
};

struct LabeledSample {
  std::string id;
  Image image;
  Grid<std::uint8_t> labels;     // 0 background, 1 artery, 2 vein
  Grid<std::uint8_t> eval_mask;  // 1 = evaluated
  double pixel_size_microns = kDefaultPixelSizeMicrons;

  // Throws DataError if shapes disagree or labels leave {0,1,2}.
  void validate() const;
};

enum class Split { kTrain, kVal, kTest };
const char* to_string(Split split);
Split parse_split(const std::string& text);

struct ManifestRecord {
  std::string id;
  std::filesystem::path image;  // relative to the manifest directory
  std::filesystem::path label;
  std::filesystem::path mask;   // empty when absent
  Split split = Split::kTrain;
};

/// Line-oriented manifest:
///
///   # pixel_size_microns=12.5        (optional directive)
///   id,image,label,mask,split
///   case01,images/case01.png,labels/case01.png,,train
///
/// Paths are relative to the manifest's directory. Blank lines and other
/// '#' lines are ignored.
struct DatasetManifest {
  std::vector<ManifestRecord> records;
  double pixel_size_microns = kDefaultPixelSizeMicrons;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path);

// Grayscale label codec: background 0, artery 128, vein 255.
Grid<std::uint8_t> encode_labels(const Grid<std::uint8_t>& labels);
// Throws DataError naming the first out-of-set value.
Grid<std::uint8_t> decode_labels(const Grid<std::uint8_t>& encoded);

// 8/16-bit gray or RGB(A) PNG -> [C,H,W] in [0,1]; alpha is dropped.
Image load_image(const std::filesystem::path& path);
// Writes 8-bit gray (C=1) or RGB (C=3); values are rounded to n/255.
void save_image(const Image& image, const std::filesystem::path& path);
Grid<std::uint8_t> load_label_png(const std::filesystem::path& path);
void save_label_png(const Grid<std::uint8_t>& labels,
                    const std::filesystem::path& path);

// Loads every record (optionally one split), sorted by id.
std::vector<LabeledSample> load_dataset(const std::filesystem::path& manifest,
                                        std::optional<Split> split = {});

// Writes images/<id>.png, labels/<id>.png (and masks/<id>.png if the mask
// is not all ones) under `root`; returns the record with relative paths.
ManifestRecord save_sample(const LabeledSample& sample,
                           const std::filesystem::path& root, Split split);

}  // namespace segravir

#endif  // SEGRAVIR_DATASET_HPP_
