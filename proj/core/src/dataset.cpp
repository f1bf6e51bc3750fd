// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "segravir/error.hpp"
#include "segravir/png_io.hpp"

namespace segravir {

namespace fs = std::filesystem;

void LabeledSample::validate() const {
  if (labels.height != image.height || labels.width != image.width) {
    throw DataError(id + ": label size " + std::to_string(labels.height) + "x" +
                    std::to_string(labels.width) + " differs from image " +
                    std::to_string(image.height) + "x" +
                    std::to_string(image.width));
  }
  if (eval_mask.height != image.height || eval_mask.width != image.width) {
    throw DataError(id + ": mask size differs from image");
  }
  for (std::uint8_t v : labels.values) {
    if (v > kVein) {
      throw DataError(id + ": label value " + std::to_string(v) +
                      " outside {0,1,2}");
    }
  }
}

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw DataError("unknown split '" + text + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  DatasetManifest manifest;
  std::string line;
  bool header_seen = false;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (text[0] == '#') {
      const std::string body = trim(text.substr(1));
      const std::string key = "pixel_size_microns=";
      if (body.rfind(key, 0) == 0) {
        try {
          manifest.pixel_size_microns = std::stod(body.substr(key.size()));
        } catch (const std::exception&) {
          throw DataError(where + ": bad pixel_size_microns directive");
        }
        if (!(manifest.pixel_size_microns > 0.0)) {
          throw DataError(where + ": pixel_size_microns must be > 0");
        }
      }
      continue;
    }
    const std::vector<std::string> fields = split_fields(text);
    if (!header_seen) {
      const std::vector<std::string> expected = {"id", "image", "label", "mask",
                                                 "split"};
      if (fields != expected) {
        throw DataError(where + ": expected header id,image,label,mask,split");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 5) {
      throw DataError(where + ": expected 5 fields, got " +
                      std::to_string(fields.size()));
    }
    ManifestRecord rec;
    rec.id = fields[0];
    rec.image = fields[1];
    rec.label = fields[2];
    rec.mask = fields[3];
    try {
      rec.split = parse_split(fields[4]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (rec.id.empty()) throw DataError(where + ": empty id");
    if (!ids.insert(rec.id).second) {
      throw DataError(where + ": duplicate id '" + rec.id + "'");
    }
    manifest.records.push_back(std::move(rec));
  }
  if (!header_seen && !manifest.records.empty()) {
    throw DataError(path.string() + ": missing header");
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << "# pixel_size_microns=" << manifest.pixel_size_microns << "\n";
  out << "id,image,label,mask,split\n";
  for (const ManifestRecord& r : manifest.records) {
    out << r.id << "," << r.image.generic_string() << ","
        << r.label.generic_string() << "," << r.mask.generic_string() << ","
        << to_string(r.split) << "\n";
  }
  if (!out) throw DataError("failed writing manifest " + path.string());
}

Grid<std::uint8_t> encode_labels(const Grid<std::uint8_t>& labels) {
  Grid<std::uint8_t> out(labels.height, labels.width);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    switch (labels.values[k]) {
      case kBackground:
        out.values[k] = 0;
        break;
      case kArtery:
        out.values[k] = 128;
        break;
      case kVein:
        out.values[k] = 255;
        break;
      default:
        throw DataError("cannot encode label value " +
                        std::to_string(labels.values[k]));
    }
  }
  return out;
}

Grid<std::uint8_t> decode_labels(const Grid<std::uint8_t>& encoded) {
  Grid<std::uint8_t> out(encoded.height, encoded.width);
  for (std::size_t k = 0; k < encoded.size(); ++k) {
    switch (encoded.values[k]) {
      case 0:
        out.values[k] = kBackground;
        break;
      case 128:
        out.values[k] = kArtery;
        break;
      case 255:
        out.values[k] = kVein;
        break;
      default:
        throw DataError("unknown label value " +
                        std::to_string(encoded.values[k]) + " at pixel (" +
                        std::to_string(k / std::max<std::size_t>(encoded.width, 1)) +
                        "," +
                        std::to_string(k % std::max<std::size_t>(encoded.width, 1)) +
                        ")");
    }
  }
  return out;
}

Image load_image(const fs::path& path) {
  const RasterImage raster = read_png(path);
  Image image;
  image.channels = raster.channels >= 3 ? 3 : 1;
  image.height = raster.height;
  image.width = raster.width;
  image.values.resize(image.channels * image.height * image.width);
  const double scale = raster.bit_depth == 16 ? 65535.0 : 255.0;
  for (std::size_t c = 0; c < image.channels; ++c) {
    for (std::size_t i = 0; i < image.height; ++i) {
      for (std::size_t j = 0; j < image.width; ++j) {
        image.at(c, i, j) = raster.at(i, j, c) / scale;
      }
    }
  }
  return image;
}

void save_image(const Image& image, const fs::path& path) {
  if (image.channels != 1 && image.channels != 3) {
    throw InvalidArgument("save_image supports 1 or 3 channels");
  }
  std::vector<std::uint16_t> samples(image.values.size());
  for (std::size_t i = 0; i < image.height; ++i) {
    for (std::size_t j = 0; j < image.width; ++j) {
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double v = std::clamp(image.at(c, i, j), 0.0, 1.0);
        samples[(i * image.width + j) * image.channels + c] =
            static_cast<std::uint16_t>(std::lround(v * 255.0));
      }
    }
  }
  write_png(path, image.height, image.width, image.channels, 8, samples);
}

Grid<std::uint8_t> load_label_png(const fs::path& path) {
  const RasterImage raster = read_png(path);
  if (raster.bit_depth != 8) {
    throw DataError(path.string() + ": label images must be 8-bit");
  }
  Grid<std::uint8_t> encoded(raster.height, raster.width);
  for (std::size_t i = 0; i < raster.height; ++i) {
    for (std::size_t j = 0; j < raster.width; ++j) {
      encoded(i, j) = static_cast<std::uint8_t>(raster.at(i, j, 0));
    }
  }
  try {
    return decode_labels(encoded);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_label_png(const Grid<std::uint8_t>& labels, const fs::path& path) {
  const Grid<std::uint8_t> encoded = encode_labels(labels);
  std::vector<std::uint16_t> samples(encoded.values.begin(), encoded.values.end());
  write_png(path, labels.height, labels.width, 1, 8, samples);
}

std::vector<LabeledSample> load_dataset(const fs::path& manifest_path,
                                        std::optional<Split> split) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  const fs::path base = manifest_path.parent_path();
  std::vector<LabeledSample> out;
  for (const ManifestRecord& rec : manifest.records) {
    if (split && rec.split != *split) continue;
    LabeledSample s;
    s.id = rec.id;
    s.pixel_size_microns = manifest.pixel_size_microns;
    const fs::path image_path = base / rec.image;
    const fs::path label_path = base / rec.label;
    if (!fs::exists(image_path)) {
      throw DataError(rec.id + ": missing image file " + image_path.string());
    }
    if (!fs::exists(label_path)) {
      throw DataError(rec.id + ": missing label file " + label_path.string());
    }
    s.image = load_image(image_path);
    s.labels = load_label_png(label_path);
    if (rec.mask.empty()) {
      s.eval_mask = Grid<std::uint8_t>(s.image.height, s.image.width, 1);
    } else {
      const fs::path mask_path = base / rec.mask;
      if (!fs::exists(mask_path)) {
        throw DataError(rec.id + ": missing mask file " + mask_path.string());
      }
      const RasterImage raster = read_png(mask_path);
      s.eval_mask = Grid<std::uint8_t>(raster.height, raster.width);
      for (std::size_t i = 0; i < raster.height; ++i) {
        for (std::size_t j = 0; j < raster.width; ++j) {
          s.eval_mask(i, j) = raster.at(i, j, 0) != 0 ? 1 : 0;
        }
      }
    }
    s.validate();
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(),
            [](const LabeledSample& a, const LabeledSample& b) { return a.id < b.id; });
  return out;
}

ManifestRecord save_sample(const LabeledSample& sample, const fs::path& root,
                           Split split) {
  sample.validate();
  ManifestRecord rec;
  rec.id = sample.id;
  rec.split = split;
  rec.image = fs::path("images") / (sample.id + ".png");
  rec.label = fs::path("labels") / (sample.id + ".png");
  fs::create_directories(root / "images");
  fs::create_directories(root / "labels");
  save_image(sample.image, root / rec.image);
  save_label_png(sample.labels, root / rec.label);
  const bool full_mask = std::all_of(sample.eval_mask.values.begin(),
                                     sample.eval_mask.values.end(),
                                     [](std::uint8_t v) { return v != 0; });
  if (!full_mask) {
    rec.mask = fs::path("masks") / (sample.id + ".png");
    fs::create_directories(root / "masks");
    std::vector<std::uint16_t> samples(sample.eval_mask.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
      samples[k] = sample.eval_mask.values[k] ? 255 : 0;
    }
    write_png(root / rec.mask, sample.eval_mask.height, sample.eval_mask.width,
              1, 8, samples);
  }
  return rec;
}

}  // namespace segravir
