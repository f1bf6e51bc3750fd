// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_MODEL_HPP_
#define SEGRAVIR_MODEL_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segravir/adam.hpp"
#include "segravir/ops.hpp"
#include "segravir/tensor.hpp"

namespace segravir {

struct ModelConfig {
  int input_channels = 1;
  int base_channels = 32;
  int num_resolutions = 4;
  int num_classes = 3;
  double dropout_rate = 0.1;
  bool aux_enabled = true;

  // Throws InvalidArgument naming the offending field. `min_classes` is 2
  // for freshly built models; adapted heads may go down to one channel.
  void validate(int min_classes = 2) const;
  int channels_at(int resolution) const { return base_channels << resolution; }
  // Spatial sizes must be multiples of this.
  int spatial_multiple() const { return 1 << num_resolutions; }

  bool operator==(const ModelConfig&) const = default;
};

/// Two-stream residual encoder-decoder.
///
/// Main stream: stem conv, then per resolution r a residual block followed by
/// a stride-2 conv (channels base*2^r -> base*2^(r+1)), three bottleneck
/// residual blocks, a mirrored decoder of transposed conv + residual block
/// with additive encoder skips, and a head of two 3x3 conv units plus a 1x1
/// conv producing class logits. The auxiliary stream is a second decoder with
/// the same skips ending in a 1x1 conv + ReLU that reconstructs the input.
///
/// Every conv unit is conv -> ReLU -> batch norm -> dropout. Copies are deep.
class Model {
 public:
  Model() = default;
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  NamedParameters& parameters() { return params_; }
  const NamedParameters& parameters() const { return params_; }
  std::map<std::string, ops::BatchNormStats>& bn_stats() { return bn_; }
  const std::map<std::string, ops::BatchNormStats>& bn_stats() const {
    return bn_;
  }
  std::size_t parameter_count() const;

  // Parameter lookup that throws DataError with the missing name.
  Tensor& param(const std::string& name);

 private:
  friend Model build_model(const ModelConfig& config, std::uint64_t init_seed);
  friend Model adapt_head(const Model& model, int new_out_channels,
                          std::uint64_t init_seed);
  friend Model adapt_input(const Model& model, int new_in_channels);
  friend Model make_model_skeleton(const ModelConfig& config);

  ModelConfig config_;
  NamedParameters params_;
  std::map<std::string, ops::BatchNormStats> bn_;
};

struct ForwardResult {
  Tensor seg_logits;            // [N, num_classes, H, W], pre-softmax
  std::optional<Tensor> recon;  // [N, input_channels, H, W] iff aux enabled
};

// Intermediate activations, for inspection in tests.
struct ForwardTrace {
  std::vector<Tensor> encoder_skips;    // residual block outputs, r = 0..3
  std::vector<Tensor> decoder_outputs;  // after skip addition, r = 0..3
};

Model build_model(const ModelConfig& config, std::uint64_t init_seed);

// Same structure as build_model with all parameters zero; used by loaders.
Model make_model_skeleton(const ModelConfig& config);

// Train mode updates batch-norm running statistics in `model`.
ForwardResult forward(Model& model, const Tensor& batch, Mode mode,
                      std::uint64_t rng_seed, ForwardTrace* trace = nullptr);

// Re-initializes the final 1x1 conv with `new_out_channels` outputs and drops
// the auxiliary decoder.
Model adapt_head(const Model& model, int new_out_channels,
                 std::uint64_t init_seed);

// Maps the stem kernel to `new_in_channels` so that an image replicated
// across the new channels produces the same output as the same image
// replicated across the old ones.
Model adapt_input(const Model& model, int new_in_channels);

}  // namespace segravir

#endif  // SEGRAVIR_MODEL_HPP_
