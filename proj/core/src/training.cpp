// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>

#include "segravir/error.hpp"
#include "segravir/metrics.hpp"
#include "segravir/rng.hpp"

namespace segravir {

void TrainConfig::validate() const {
  if (patch_size == 0 || patch_size % 16 != 0) {
    throw InvalidArgument("train.patch_size must be a positive multiple of 16");
  }
  if (batch_size == 0) throw InvalidArgument("train.batch_size must be >= 1");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) {
    throw InvalidArgument("train.lr0 must be a positive finite number");
  }
  if (lr_halving_period_epochs == 0) {
    throw InvalidArgument("train.lr_halving_period_epochs must be >= 1");
  }
  if (validation_interval == 0) {
    throw InvalidArgument("train.validation_interval must be >= 1");
  }
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw InvalidArgument("train.overlap must be in [0, 1)");
  }
  loss.validate();
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
  const auto halvings =
      static_cast<int>(epoch / config.lr_halving_period_epochs);
  return std::ldexp(config.lr0, -halvings);
}

Patch crop(const LabeledSample& sample, std::size_t top, std::size_t left,
           std::size_t patch_size) {
  const Image& im = sample.image;
  if (top + patch_size > im.height || left + patch_size > im.width) {
    throw InvalidArgument("crop: " + std::to_string(patch_size) +
                          " px patch at (" + std::to_string(top) + "," +
                          std::to_string(left) + ") exceeds " +
                          std::to_string(im.height) + "x" +
                          std::to_string(im.width) + " image '" + sample.id +
                          "'");
  }
  Patch p;
  p.top = top;
  p.left = left;
  p.image.channels = im.channels;
  p.image.height = p.image.width = patch_size;
  p.image.values.resize(im.channels * patch_size * patch_size);
  p.labels = Grid<std::uint8_t>(patch_size, patch_size);
  p.eval_mask = Grid<std::uint8_t>(patch_size, patch_size);
  for (std::size_t i = 0; i < patch_size; ++i) {
    for (std::size_t j = 0; j < patch_size; ++j) {
      for (std::size_t c = 0; c < im.channels; ++c) {
        p.image.at(c, i, j) = im.at(c, top + i, left + j);
      }
      p.labels(i, j) = sample.labels(top + i, left + j);
      p.eval_mask(i, j) = sample.eval_mask(top + i, left + j);
    }
  }
  return p;
}

std::vector<Patch> sample_patches(const LabeledSample& sample,
                                  std::size_t patch_size, std::size_t count,
                                  std::uint64_t rng_seed) {
  if (sample.image.height < patch_size || sample.image.width < patch_size) {
    throw InvalidArgument("sample_patches: image '" + sample.id + "' (" +
                          std::to_string(sample.image.height) + "x" +
                          std::to_string(sample.image.width) +
                          ") is smaller than the " + std::to_string(patch_size) +
                          " px patch");
  }
  Rng rng(rng_seed);
  std::vector<Patch> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t top = rng.below(sample.image.height - patch_size + 1);
    const std::size_t left = rng.below(sample.image.width - patch_size + 1);
    out.push_back(crop(sample, top, left, patch_size));
  }
  return out;
}

namespace {

using Coord = std::pair<std::size_t, std::size_t>;

// out(i, j) = in(source(i, j)).
template <typename Source>
Grid<std::uint8_t> remap(const Grid<std::uint8_t>& in, std::size_t h,
                         std::size_t w, Source source) {
  Grid<std::uint8_t> out(h, w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const auto [si, sj] = source(i, j);
      out(i, j) = in(si, sj);
    }
  }
  return out;
}

template <typename Source>
Image remap(const Image& in, std::size_t h, std::size_t w, Source source) {
  Image out;
  out.channels = in.channels;
  out.height = h;
  out.width = w;
  out.values.resize(in.channels * h * w);
  for (std::size_t c = 0; c < in.channels; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const auto [si, sj] = source(i, j);
        out.at(c, i, j) = in.at(c, si, sj);
      }
    }
  }
  return out;
}

template <typename Source>
void remap_patch(Patch& p, std::size_t h, std::size_t w, Source source) {
  p.image = remap(p.image, h, w, source);
  p.labels = remap(p.labels, h, w, source);
  p.eval_mask = remap(p.eval_mask, h, w, source);
}

}  // namespace

Patch augment(Patch patch, const AugmentToggles& toggles, std::uint64_t rng_seed) {
  // Every draw happens regardless of the toggles so switching one off never
  // changes the others.
  Rng rng(rng_seed);
  const std::uint64_t quarter_turns = rng.below(4);
  const bool flip_rows = rng.below(2) == 1;
  const bool flip_cols = rng.below(2) == 1;
  const double gain = rng.uniform(kContrastMin, kContrastMax);

  if (toggles.rotation) {
    for (std::uint64_t t = 0; t < quarter_turns; ++t) {
      // 90 degrees counter-clockwise.
      const std::size_t h = patch.image.height, w = patch.image.width;
      remap_patch(patch, w, h,
                  [w](std::size_t i, std::size_t j) { return Coord{j, w - 1 - i}; });
    }
  }
  if (toggles.flip) {
    const std::size_t h = patch.image.height, w = patch.image.width;
    if (flip_rows) {
      remap_patch(patch, h, w,
                  [h](std::size_t i, std::size_t j) { return Coord{h - 1 - i, j}; });
    }
    if (flip_cols) {
      remap_patch(patch, h, w,
                  [w](std::size_t i, std::size_t j) { return Coord{i, w - 1 - j}; });
    }
  }
  if (toggles.contrast) {
    // Gain about the per-channel patch mean.
    Image& im = patch.image;
    const std::size_t plane = im.height * im.width;
    for (std::size_t c = 0; c < im.channels && plane > 0; ++c) {
      double* v = im.values.data() + c * plane;
      const double mu = std::accumulate(v, v + plane, 0.0) / plane;
      for (std::size_t k = 0; k < plane; ++k) {
        v[k] = std::clamp(mu + gain * (v[k] - mu), 0.0, 1.0);
      }
    }
  }
  return patch;
}

std::uint8_t target_class(std::uint8_t label, int num_classes) {
  if (num_classes == 2) return label == kBackground ? 0 : 1;
  return label;
}

std::string TrainHistory::to_tsv() const {
  std::string out = "epoch\tlr\tloss\tdice\tce\tl2\tkl\tval_mean_f1";
  for (std::size_t k = 1; k <= foreground_classes; ++k) {
    out += "\tval_f1_" + std::to_string(k);
  }
  out += "\n";
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const EpochRecord& r : epochs) {
    out += std::to_string(r.epoch) + "\t" + num(r.lr) + "\t" + num(r.loss) +
           "\t" + num(r.dice) + "\t" + num(r.cross_entropy) + "\t" + num(r.l2) +
           "\t" + num(r.kl);
    out += "\t" + (r.validated ? num(r.val_mean_f1) : std::string("-"));
    for (std::size_t k = 0; k < foreground_classes; ++k) {
      out += "\t" + (r.validated && k < r.val_f1.size() ? num(r.val_f1[k])
                                                        : std::string("-"));
    }
    out += "\n";
  }
  return out;
}

void TrainHistory::write_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write history " + path.string());
  out << to_tsv();
  if (!out) throw DataError("failed writing history " + path.string());
}

std::vector<double> foreground_f1(Model& model,
                                  const std::vector<LabeledSample>& samples,
                                  std::size_t patch_size, double overlap) {
  const int K = model.config().num_classes;
  std::vector<ConfusionCounts> counts(K);
  for (const LabeledSample& s : samples) {
    const ProbabilityMap prob = sliding_window_infer(model, s.image, patch_size, overlap);
    const Grid<std::uint8_t> pred = argmax_labels(prob);
    BinaryMask mask(s.labels.height, s.labels.width);
    mask.values = s.eval_mask.values;
    for (int k = 1; k < K; ++k) {
      BinaryMask p(pred.height, pred.width), g(pred.height, pred.width);
      for (std::size_t q = 0; q < pred.size(); ++q) {
        p.values[q] = pred.values[q] == k;
        g.values[q] = target_class(s.labels.values[q], K) == k;
      }
      const ConfusionCounts c = confusion_metrics(p, g, &mask).counts;
      counts[k].tp += c.tp;
      counts[k].fp += c.fp;
      counts[k].tn += c.tn;
      counts[k].fn += c.fn;
    }
  }
  std::vector<double> f1;
  for (int k = 1; k < K; ++k) {
    const ConfusionCounts& c = counts[k];
    const double denom = 2.0 * c.tp + c.fp + c.fn;
    f1.push_back(denom == 0.0 ? 1.0 : 2.0 * c.tp / denom);
  }
  return f1;
}

namespace {

struct StepBatch {
  Tensor images;
  Tensor target;
  Tensor mask;  // undefined when every pixel counts
};

struct StepLoss {
  Tensor total;
  double dice = 0.0;
  double cross_entropy = 0.0;
  double l2 = 0.0;
  double kl = 0.0;
};

using LossFn = std::function<StepLoss(Model&, const StepBatch&, std::uint64_t)>;

void check_sets(const Model& model, const std::vector<LabeledSample>& train_set,
                const std::vector<LabeledSample>& val_set,
                const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  if (val_set.empty()) throw DataError("validation set is empty");
  const ModelConfig& mc = model.config();
  if (mc.num_classes != 2 && mc.num_classes != 3) {
    throw InvalidArgument("training needs a 2- or 3-class model");
  }
  if (config.patch_size % static_cast<std::size_t>(mc.spatial_multiple())) {
    throw InvalidArgument("train.patch_size must be a multiple of " +
                          std::to_string(mc.spatial_multiple()));
  }
  for (const auto* set : {&train_set, &val_set}) {
    for (const LabeledSample& s : *set) {
      s.validate();
      if (s.image.channels != static_cast<std::size_t>(mc.input_channels)) {
        throw DataError(s.id + ": image has " + std::to_string(s.image.channels) +
                        " channels, model expects " +
                        std::to_string(mc.input_channels));
      }
    }
  }
  for (const LabeledSample& s : train_set) {
    if (s.image.height < config.patch_size || s.image.width < config.patch_size) {
      throw DataError(s.id + ": image smaller than the " +
                      std::to_string(config.patch_size) + " px patch");
    }
  }
}

StepBatch assemble(const std::vector<Patch>& patches, int num_classes) {
  const std::size_t N = patches.size();
  const std::size_t C = patches[0].image.channels;
  const std::size_t P = patches[0].image.height;
  std::vector<double> images;
  images.reserve(N * C * P * P);
  std::vector<std::uint8_t> labels;
  labels.reserve(N * P * P);
  std::vector<double> mask;
  mask.reserve(N * P * P);
  bool partial = false;
  for (const Patch& p : patches) {
    images.insert(images.end(), p.image.values.begin(), p.image.values.end());
    for (std::size_t q = 0; q < p.labels.size(); ++q) {
      labels.push_back(target_class(p.labels.values[q], num_classes));
      mask.push_back(p.eval_mask.values[q] ? 1.0 : 0.0);
      partial = partial || !p.eval_mask.values[q];
    }
  }
  StepBatch b;
  b.images = Tensor({N, C, P, P}, std::move(images), false);
  b.target = one_hot(labels, N, static_cast<std::size_t>(num_classes), P, P);
  if (partial) b.mask = Tensor({N, 1, P, P}, std::move(mask), false);
  return b;
}

TrainResult run_training(Model model, const std::vector<LabeledSample>& train_set,
                         const std::vector<LabeledSample>& val_set,
                         const TrainConfig& config, const EpochCallback& on_epoch,
                         const LossFn& loss_fn) {
  check_sets(model, train_set, val_set, config);
  const int K = model.config().num_classes;
  TrainResult result;
  result.history.foreground_classes = static_cast<std::size_t>(K - 1);
  result.model = model;

  std::size_t total_pixels = 0;
  for (const LabeledSample& s : train_set) total_pixels += s.image.height * s.image.width;
  const std::size_t per_step = config.batch_size * config.patch_size * config.patch_size;
  const std::size_t steps = (total_pixels + per_step - 1) / per_step;

  const std::uint64_t shuffle_seed = derive_seed(config.seed, "shuffle");
  const std::uint64_t slot_seed = derive_seed(config.seed, "slot");
  const std::uint64_t augment_seed = derive_seed(config.seed, "augment");
  const std::uint64_t dropout_seed = derive_seed(config.seed, "dropout");

  AdamState adam;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = learning_rate_at(config, epoch);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(shuffle_seed, {epoch}));
    for (std::size_t k = order.size(); k > 1; --k) {
      std::swap(order[k - 1], order[shuffle.below(k)]);
    }

    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<Patch> patches;
      for (std::size_t b = 0; b < config.batch_size; ++b) {
        const std::size_t slot = step * config.batch_size + b;
        const LabeledSample& s = train_set[order[slot % order.size()]];
        Patch p = sample_patches(s, config.patch_size, 1,
                                 derive_seed(slot_seed, {epoch, slot}))[0];
        patches.push_back(augment(std::move(p), config.augment,
                                  derive_seed(augment_seed, {epoch, slot})));
      }
      const StepBatch batch = assemble(patches, K);
      zero_grads(model.parameters());
      const StepLoss loss =
          loss_fn(model, batch, derive_seed(dropout_seed, {epoch, step}));
      const double value = loss.total.item();
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step));
      }
      loss.total.backward();
      adam_step(model.parameters(), adam, rec.lr);
      rec.loss += value / steps;
      rec.dice += loss.dice / steps;
      rec.cross_entropy += loss.cross_entropy / steps;
      rec.l2 += loss.l2 / steps;
      rec.kl += loss.kl / steps;
    }

    if ((epoch + 1) % config.validation_interval == 0 || epoch + 1 == config.epochs) {
      rec.validated = true;
      rec.val_f1 = foreground_f1(model, val_set, config.patch_size, config.overlap);
      rec.val_mean_f1 =
          std::accumulate(rec.val_f1.begin(), rec.val_f1.end(), 0.0) / rec.val_f1.size();
      if (result.history.best_epoch < 0 ||
          rec.val_mean_f1 > result.history.best_val_mean_f1) {
        result.history.best_epoch = static_cast<long>(epoch);
        result.history.best_val_mean_f1 = rec.val_mean_f1;
        result.model = model;
      }
    }
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace

TrainResult train(const Model& model, const std::vector<LabeledSample>& train_set,
                  const std::vector<LabeledSample>& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  const LossWeights weights = config.loss;
  return run_training(
      model, train_set, val_set, config, on_epoch,
      [weights](Model& m, const StepBatch& b, std::uint64_t seed) {
        const ForwardResult f = forward(m, b.images, Mode::kTrain, seed);
        const Tensor recon = f.recon ? *f.recon : Tensor();
        HybridLoss h = hybrid_loss(f.seg_logits, b.target, b.images, recon,
                                   weights, b.mask);
        return StepLoss{h.total, h.dice, h.cross_entropy, h.l2, 0.0};
      });
}

TrainResult finetune_teacher(const Model& pretrained,
                             const std::vector<LabeledSample>& train_set,
                             const std::vector<LabeledSample>& val_set,
                             TrainConfig config, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw DataError("training set is empty");
  Model teacher = pretrained;
  const int channels = static_cast<int>(train_set[0].image.channels);
  if (channels != teacher.config().input_channels) {
    teacher = adapt_input(teacher, channels);
  }
  teacher = adapt_head(teacher, 2, derive_seed(config.seed, "teacher.head"));
  config.loss.lambda3 = 0.0;
  return train(teacher, train_set, val_set, config, on_epoch);
}

TrainResult distill_train(const Model& teacher, const Model& student,
                          const std::vector<LabeledSample>& train_set,
                          const std::vector<LabeledSample>& val_set,
                          const TrainConfig& config, const EpochCallback& on_epoch) {
  if (teacher.config().num_classes != student.config().num_classes) {
    throw InvalidArgument("distill: teacher has " +
                          std::to_string(teacher.config().num_classes) +
                          " classes, student " +
                          std::to_string(student.config().num_classes));
  }
  if (teacher.config().input_channels != student.config().input_channels) {
    throw InvalidArgument("distill: teacher and student input channels differ");
  }
  // Eval-mode forwards leave statistics alone; the private copy makes the
  // caller's teacher safe regardless.
  auto frozen = std::make_shared<Model>(teacher);
  const LossWeights weights = config.loss;
  return run_training(
      student, train_set, val_set, config, on_epoch,
      [weights, frozen](Model& m, const StepBatch& b, std::uint64_t seed) {
        Tensor teacher_logits;
        {
          NoGradGuard no_grad;
          teacher_logits = forward(*frozen, b.images, Mode::kEval, 0).seg_logits;
        }
        const ForwardResult f = forward(m, b.images, Mode::kTrain, seed);
        DistillationLoss d =
            distillation_loss(f.seg_logits, teacher_logits, b.target, weights, b.mask);
        return StepLoss{d.total, 0.0, d.cross_entropy, 0.0, d.kl};
      });
}

}  // namespace segravir
