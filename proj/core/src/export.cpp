// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "segravir/error.hpp"
#include "segravir/png_io.hpp"

namespace segravir {

namespace fs = std::filesystem;

fs::path sidecar_path(const fs::path& png) {
  fs::path out = png;
  out.replace_extension(".txt");
  return out;
}

namespace {

std::string format(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::map<std::string, std::string> read_sidecar(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sidecar " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key, value;
    ss >> key >> value;
    out[key] = value;
  }
  return out;
}

std::size_t size_field(const std::map<std::string, std::string>& kv,
                       const std::string& key, const fs::path& path) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw DataError(path.string() + ": missing '" + key + "'");
  try {
    return static_cast<std::size_t>(std::stoull(it->second));
  } catch (const std::exception&) {
    throw DataError(path.string() + ": bad value for '" + key + "'");
  }
}

std::uint16_t quantize(double v, double scale) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v * scale, 0.0, 65535.0)));
}

}  // namespace

void export_probability_map(const ProbabilityMap& prob, const fs::path& png) {
  const std::size_t rows = prob.classes * prob.height;
  const bool empty = rows == 0 || prob.width == 0;
  std::vector<std::uint16_t> samples;
  if (empty) {
    write_png(png, 1, 1, 1, 16, {0});
  } else {
    samples.reserve(prob.values.size());
    for (double p : prob.values) samples.push_back(quantize(p, kProbabilityScale));
    write_png(png, rows, prob.width, 1, 16, samples);
  }
  write_text(sidecar_path(png),
             "classes " + std::to_string(empty ? 0 : prob.classes) + "\nheight " +
                 std::to_string(empty ? 0 : prob.height) + "\nwidth " +
                 std::to_string(empty ? 0 : prob.width) + "\nscale 65535\n");
}

ProbabilityMap read_probability_map(const fs::path& png) {
  const auto kv = read_sidecar(sidecar_path(png));
  ProbabilityMap out;
  out.classes = size_field(kv, "classes", png);
  out.height = size_field(kv, "height", png);
  out.width = size_field(kv, "width", png);
  const std::size_t n = out.classes * out.height * out.width;
  if (n == 0) {
    out.classes = out.height = out.width = 0;
    return out;
  }
  const RasterImage raster = read_png(png);
  if (raster.bit_depth != 16 || raster.channels != 1 ||
      raster.height != out.classes * out.height || raster.width != out.width) {
    throw DataError(png.string() + ": raster does not match its sidecar");
  }
  out.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.values[k] = raster.samples[k] / kProbabilityScale;
  return out;
}

void export_width_artifacts(const WidthMap& width, const fs::path& png) {
  const Grid<double>& m = width.microns;
  if (m.empty()) {
    write_png(png, 1, 1, 1, 16, {0});
  } else {
    std::vector<std::uint16_t> samples;
    samples.reserve(m.size());
    for (double v : m.values) samples.push_back(quantize(v, kWidthScale));
    write_png(png, m.height, m.width, 1, 16, samples);
  }
  write_text(sidecar_path(png),
             std::string("class ") + to_string(width.tag) +
                 "\npixel_size_microns " + format(width.pixel_size_microns) +
                 "\nscale 100\nheight " + std::to_string(m.height) + "\nwidth " +
                 std::to_string(m.width) + "\nn " +
                 std::to_string(width.summary.n) + "\nmean_um " +
                 format(width.summary.mean_um) + "\nstd_um " +
                 format(width.summary.std_um) + "\n");
}

Grid<double> read_width_map(const fs::path& png) {
  const auto kv = read_sidecar(sidecar_path(png));
  const std::size_t h = size_field(kv, "height", png);
  const std::size_t w = size_field(kv, "width", png);
  Grid<double> out(h, w, 0.0);
  if (h * w == 0) return Grid<double>();
  const RasterImage raster = read_png(png);
  if (raster.bit_depth != 16 || raster.height != h || raster.width != w) {
    throw DataError(png.string() + ": raster does not match its sidecar");
  }
  for (std::size_t k = 0; k < out.size(); ++k) out.values[k] = raster.samples[k] / kWidthScale;
  return out;
}

Image overlay(const Image& image, const Grid<std::uint8_t>& labels) {
  if (labels.height != image.height || labels.width != image.width) {
    throw InvalidArgument("overlay: label and image sizes differ");
  }
  Image out;
  out.channels = 3;
  out.height = image.height;
  out.width = image.width;
  out.values.resize(3 * image.height * image.width);
  for (std::size_t i = 0; i < image.height; ++i) {
    for (std::size_t j = 0; j < image.width; ++j) {
      double y = image.at(0, i, j);
      if (image.channels == 3) {
        y = 0.299 * image.at(0, i, j) + 0.587 * image.at(1, i, j) +
            0.114 * image.at(2, i, j);
      }
      double rgb[3] = {y, y, y};
      if (labels(i, j) == kArtery) {
        rgb[0] = 1.0, rgb[1] = 0.0, rgb[2] = 0.0;
      } else if (labels(i, j) == kVein) {
        rgb[0] = 0.0, rgb[1] = 0.0, rgb[2] = 1.0;
      }
      for (std::size_t c = 0; c < 3; ++c) out.at(c, i, j) = rgb[c];
    }
  }
  return out;
}

}  // namespace segravir
