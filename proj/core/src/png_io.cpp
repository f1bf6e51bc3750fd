// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "segravir/error.hpp"

namespace segravir {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void warning_handler(png_structp, png_const_charp) {}

}  // namespace

RasterImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open image " + path.string());
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8)) {
    throw DataError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           nullptr, warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed for " + path.string());
  }
  RasterImage image;
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG file: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);  // native little-endian 16-bit
  png_read_update_info(png, info);

  image.height = png_get_image_height(png, info);
  image.width = png_get_image_width(png, info);
  image.channels = png_get_channels(png, info);
  image.bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  buffer.resize(row_bytes * image.height);
  rows.resize(image.height);
  for (std::size_t i = 0; i < image.height; ++i) rows[i] = buffer.data() + i * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = image.height * image.width * image.channels;
  image.samples.resize(count);
  if (image.bit_depth == 16) {
    for (std::size_t k = 0; k < count; ++k) {
      image.samples[k] = static_cast<std::uint16_t>(buffer[2 * k] |
                                                    (buffer[2 * k + 1] << 8));
    }
  } else {
    for (std::size_t k = 0; k < count; ++k) image.samples[k] = buffer[k];
  }
  return image;
}

void write_png(const std::filesystem::path& path, std::size_t height,
               std::size_t width, std::size_t channels, int bit_depth,
               const std::vector<std::uint16_t>& samples) {
  if (channels != 1 && channels != 3) {
    throw InvalidArgument("write_png supports 1 or 3 channels");
  }
  if (bit_depth != 8 && bit_depth != 16) {
    throw InvalidArgument("write_png supports bit depth 8 or 16");
  }
  if (height == 0 || width == 0) {
    throw InvalidArgument("write_png: empty image for " + path.string());
  }
  if (samples.size() != height * width * channels) {
    throw InvalidArgument("write_png: sample count mismatch for " + path.string());
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed for " + path.string());
  }
  const std::size_t bytes_per_sample = bit_depth / 8;
  std::vector<png_byte> buffer(samples.size() * bytes_per_sample);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (bit_depth == 16) {
      buffer[2 * k] = static_cast<png_byte>(samples[k] >> 8);  // big-endian
      buffer[2 * k + 1] = static_cast<png_byte>(samples[k] & 0xff);
    } else {
      buffer[k] = static_cast<png_byte>(samples[k]);
    }
  }
  std::vector<png_bytep> rows(height);
  const std::size_t row_bytes = width * channels * bytes_per_sample;
  for (std::size_t i = 0; i < height; ++i) rows[i] = buffer.data() + i * row_bytes;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) {
    throw DataError("failed flushing PNG " + path.string());
  }
}

}  // namespace segravir
