// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/inference.hpp"

#include <cmath>

#include "segravir/error.hpp"

namespace segravir {

std::vector<std::size_t> tile_origins(std::size_t extent, std::size_t patch,
                                      double overlap) {
  if (patch == 0 || extent < patch) {
    throw InvalidArgument("tile_origins: extent " + std::to_string(extent) +
                          " smaller than patch " + std::to_string(patch));
  }
  const auto stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(patch * (1.0 - overlap))));
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + patch <= extent; o += stride) out.push_back(o);
  if (out.back() + patch != extent) out.push_back(extent - patch);
  return out;
}

namespace {

std::size_t reflect_index(long k, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  long m = k % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - m);
}

Tensor to_batch(const Image& image) {
  return Tensor({1, image.channels, image.height, image.width}, image.values,
                false);
}

}  // namespace

Image reflect_pad(const Image& image, std::size_t height, std::size_t width) {
  if (height < image.height || width < image.width) {
    throw InvalidArgument("reflect_pad: target smaller than image");
  }
  Image out;
  out.channels = image.channels;
  out.height = height;
  out.width = width;
  out.values.resize(out.channels * height * width);
  for (std::size_t c = 0; c < out.channels; ++c) {
    for (std::size_t i = 0; i < height; ++i) {
      const std::size_t si = reflect_index(static_cast<long>(i), image.height);
      for (std::size_t j = 0; j < width; ++j) {
        out.at(c, i, j) =
            image.at(c, si, reflect_index(static_cast<long>(j), image.width));
      }
    }
  }
  return out;
}

ProbabilityMap direct_infer(Model& model, const Image& image) {
  NoGradGuard no_grad;
  const ForwardResult f = forward(model, to_batch(image), Mode::kEval, 0);
  const Tensor probs = ops::softmax(f.seg_logits, 1, 1.0);
  ProbabilityMap out;
  out.classes = probs.dim(1);
  out.height = image.height;
  out.width = image.width;
  out.values.assign(probs.data().begin(), probs.data().end());
  return out;
}

ProbabilityMap sliding_window_infer(Model& model, const Image& image,
                                    std::size_t patch_size,
                                    double overlap_fraction) {
  if (image.height == 0 || image.width == 0) {
    throw InvalidArgument("sliding_window_infer: empty image");
  }
  if (patch_size == 0 ||
      patch_size % static_cast<std::size_t>(model.config().spatial_multiple())) {
    throw InvalidArgument("sliding_window_infer: patch size " +
                          std::to_string(patch_size) + " must be a multiple of " +
                          std::to_string(model.config().spatial_multiple()));
  }
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw InvalidArgument("sliding_window_infer: overlap must be in [0, 1)");
  }
  if (image.channels != static_cast<std::size_t>(model.config().input_channels)) {
    throw InvalidArgument("sliding_window_infer: image has " +
                          std::to_string(image.channels) +
                          " channels, model expects " +
                          std::to_string(model.config().input_channels));
  }
  const Image padded =
      (image.height < patch_size || image.width < patch_size)
          ? reflect_pad(image, std::max(image.height, patch_size),
                        std::max(image.width, patch_size))
          : image;
  const std::size_t K = static_cast<std::size_t>(model.config().num_classes);
  const std::size_t H = padded.height, W = padded.width;
  std::vector<double> total(K * H * W, 0.0);
  std::vector<std::uint32_t> hits(H * W, 0);

  Image tile;
  tile.channels = padded.channels;
  tile.height = tile.width = patch_size;
  tile.values.resize(tile.channels * patch_size * patch_size);
  for (std::size_t top : tile_origins(H, patch_size, overlap_fraction)) {
    for (std::size_t left : tile_origins(W, patch_size, overlap_fraction)) {
      for (std::size_t c = 0; c < tile.channels; ++c) {
        for (std::size_t i = 0; i < patch_size; ++i) {
          for (std::size_t j = 0; j < patch_size; ++j) {
            tile.at(c, i, j) = padded.at(c, top + i, left + j);
          }
        }
      }
      const ProbabilityMap p = direct_infer(model, tile);
      for (std::size_t i = 0; i < patch_size; ++i) {
        for (std::size_t j = 0; j < patch_size; ++j) {
          hits[(top + i) * W + left + j] += 1;
          for (std::size_t k = 0; k < K; ++k) {
            total[(k * H + top + i) * W + left + j] += p.at(k, i, j);
          }
        }
      }
    }
  }

  ProbabilityMap out;
  out.classes = K;
  out.height = image.height;
  out.width = image.width;
  out.values.resize(K * image.height * image.width);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < image.height; ++i) {
      for (std::size_t j = 0; j < image.width; ++j) {
        const std::uint32_t n = hits[i * W + j];
        const double v = total[(k * H + i) * W + j];
        out.at(k, i, j) = n == 1 ? v : v / static_cast<double>(n);
      }
    }
  }
  return out;
}

Grid<std::uint8_t> argmax_labels(const ProbabilityMap& prob) {
  Grid<std::uint8_t> out(prob.height, prob.width, 0);
  for (std::size_t i = 0; i < prob.height; ++i) {
    for (std::size_t j = 0; j < prob.width; ++j) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < prob.classes; ++k) {
        if (prob.at(k, i, j) > prob.at(best, i, j)) best = k;
      }
      out(i, j) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

}  // namespace segravir
