// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_TRAINING_HPP_
#define SEGRAVIR_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "segravir/dataset.hpp"
#include "segravir/inference.hpp"
#include "segravir/losses.hpp"
#include "segravir/model.hpp"

namespace segravir {

struct AugmentToggles {
  bool rotation = true;  // multiples of 90 degrees
  bool flip = true;      // horizontal and vertical
  bool contrast = true;  // image-only gain in [0.8, 1.25]
};

inline constexpr double kContrastMin = 0.8;
inline constexpr double kContrastMax = 1.25;

struct TrainConfig {
  std::size_t patch_size = 256;
  std::size_t batch_size = 6;
  std::size_t epochs = 600;
  double lr0 = 0.001;
  std::size_t lr_halving_period_epochs = 50;
  AugmentToggles augment;
  std::uint64_t seed = 0;
  std::size_t validation_interval = 5;
  double overlap = kDefaultOverlap;  // sliding window during validation
  LossWeights loss;

  // Throws InvalidArgument naming the offending field.
  void validate() const;
};

// lr0 * 2^-floor(epoch / period).
double learning_rate_at(const TrainConfig& config, std::size_t epoch);

struct Patch {
  Image image;
  Grid<std::uint8_t> labels;
  Grid<std::uint8_t> eval_mask;
  std::size_t top = 0;
  std::size_t left = 0;
};

Patch crop(const LabeledSample& sample, std::size_t top, std::size_t left,
           std::size_t patch_size);

// `count` crops with uniformly random top-left corners. Throws
// InvalidArgument if the image is smaller than the patch.
std::vector<Patch> sample_patches(const LabeledSample& sample,
                                  std::size_t patch_size, std::size_t count,
                                  std::uint64_t rng_seed);

// Rotation/flip move image, labels and mask together; contrast scales the
// image only (clamped to [0, 1]).
Patch augment(Patch patch, const AugmentToggles& toggles, std::uint64_t rng_seed);

// Foreground classes are merged into class 1 for two-class models.
std::uint8_t target_class(std::uint8_t label, int num_classes);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;  // mean over the epoch's steps
  double dice = 0.0;
  double cross_entropy = 0.0;
  double l2 = 0.0;
  double kl = 0.0;
  bool validated = false;
  std::vector<double> val_f1;  // per foreground class
  double val_mean_f1 = 0.0;
};

struct TrainHistory {
  std::size_t foreground_classes = 0;
  std::vector<EpochRecord> epochs;
  // -1 until a validation pass happened.
  long best_epoch = -1;
  double best_val_mean_f1 = 0.0;

  /// Tab-separated, one row per epoch:
  ///   epoch lr loss dice ce l2 kl val_mean_f1 val_f1_1 .. val_f1_{K-1}
  /// Validation columns are "-" on epochs without a validation pass.
  /// Numbers use %.17g so rows roundtrip exactly.
  std::string to_tsv() const;
  void write_tsv(const std::filesystem::path& path) const;
};

// Per-foreground-class F1 (= Dice) pooled over the set, evaluated on argmax
// labels inside each sample's eval mask. Empty-vs-empty counts as 1.
std::vector<double> foreground_f1(Model& model,
                                  const std::vector<LabeledSample>& samples,
                                  std::size_t patch_size, double overlap);

// Called after every epoch; handy for logs.
using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  Model model;  // best validated checkpoint (the input model if none)
  TrainHistory history;
};

/// Hybrid-loss Adam training with best-mean-F1 selection.
///
/// Steps per epoch: ceil(total train pixels / (batch * patch^2)). Slot s of
/// epoch e draws sample order[s mod n] from a per-epoch shuffle, with its
/// crop and augmentation seeded from (seed, e, s), so results depend only on
/// (model, data, config). Validation runs every `validation_interval` epochs
/// and after the last one.
TrainResult train(const Model& model, const std::vector<LabeledSample>& train_set,
                  const std::vector<LabeledSample>& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// adapt_input to the data's channel count, adapt_head to two classes (which
// drops the auxiliary stream), then train with lambda3 = 0.
TrainResult finetune_teacher(const Model& pretrained,
                             const std::vector<LabeledSample>& train_set,
                             const std::vector<LabeledSample>& val_set,
                             TrainConfig config, const EpochCallback& on_epoch = {});

/// Student training against a frozen teacher with distillation_loss.
///
/// The teacher runs in eval mode without gradients on the same augmented
/// batches; its parameters and statistics are never modified. Batching,
/// seeding and selection follow train().
TrainResult distill_train(const Model& teacher, const Model& student,
                          const std::vector<LabeledSample>& train_set,
                          const std::vector<LabeledSample>& val_set,
                          const TrainConfig& config,
                          const EpochCallback& on_epoch = {});

}  // namespace segravir

#endif  // SEGRAVIR_TRAINING_HPP_
