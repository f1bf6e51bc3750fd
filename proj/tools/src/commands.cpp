// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "segravir/checkpoint.hpp"
#include "segravir/cli.hpp"
#include "segravir/dataset.hpp"
#include "segravir/error.hpp"
#include "segravir/export.hpp"
#include "segravir/inference.hpp"
#include "segravir/metrics.hpp"
#include "segravir/png_io.hpp"
#include "segravir/rng.hpp"
#include "segravir/synth.hpp"
#include "segravir/training.hpp"
#include "segravir/width.hpp"

namespace segravir::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
  json config;
  fs::path out;
  std::ostream& log;
  std::ostream& err;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string lr_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

fs::path require_path(const json& config, const std::string& key) {
  const std::string value = config.at(key).get<std::string>();
  if (value.empty()) throw InvalidArgument("config key '" + key + "' is required");
  return value;
}

std::size_t positive(const json& config, const std::string& key) {
  const auto v = config.at(key).get<long long>();
  if (v < 1) throw InvalidArgument("config key '" + key + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

std::size_t non_negative(const json& config, const std::string& key) {
  const auto v = config.at(key).get<long long>();
  if (v < 0) throw InvalidArgument("config key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

ModelConfig model_config(const json& j, std::size_t data_channels) {
  ModelConfig m;
  const int channels = j.at("input_channels").get<int>();
  m.input_channels = channels == 0 ? static_cast<int>(data_channels) : channels;
  m.base_channels = j.at("base_channels").get<int>();
  m.num_resolutions = j.at("num_resolutions").get<int>();
  m.num_classes = j.at("num_classes").get<int>();
  m.dropout_rate = j.at("dropout_rate").get<double>();
  m.aux_enabled = j.at("aux_enabled").get<bool>();
  m.validate();
  return m;
}

TrainConfig train_config(const json& j, std::uint64_t seed) {
  TrainConfig t;
  t.patch_size = positive(j, "patch_size");
  t.batch_size = positive(j, "batch_size");
  t.epochs = non_negative(j, "epochs");
  t.lr0 = j.at("lr0").get<double>();
  t.lr_halving_period_epochs = positive(j, "lr_halving_period_epochs");
  t.validation_interval = positive(j, "validation_interval");
  t.overlap = j.at("overlap").get<double>();
  t.augment.rotation = j.at("augment").at("rotation").get<bool>();
  t.augment.flip = j.at("augment").at("flip").get<bool>();
  t.augment.contrast = j.at("augment").at("contrast").get<bool>();
  t.seed = seed;
  return t;
}

std::vector<LabeledSample> load_split(const fs::path& manifest, const std::string& split) {
  return load_dataset(manifest, parse_split(split));
}

EpochCallback epoch_logger(Context& ctx, std::ofstream& file) {
  return [&ctx, &file](const EpochRecord& r) {
    std::string line = "epoch " + std::to_string(r.epoch) + " lr " + lr_num(r.lr) +
                       " loss " + short_num(r.loss) + " dice " + short_num(r.dice) +
                       " ce " + short_num(r.cross_entropy) + " l2 " +
                       short_num(r.l2) + " kl " + short_num(r.kl);
    if (r.validated) line += " val_mean_f1 " + short_num(r.val_mean_f1);
    file << line << "\n";
    ctx.log << line << "\n";
  };
}

// ---------------------------------------------------------------- synth

int cmd_synth(Context& ctx) {
  const json& c = ctx.config;
  const json& s = c.at("synth");
  SynthSpec spec;
  spec.height = positive(s, "height");
  spec.width = positive(s, "width");
  spec.channels = positive(s, "channels");
  spec.vessel_count = non_negative(s, "vessel_count");
  spec.min_width_px = s.at("min_width_px").get<int>();
  spec.max_width_px = s.at("max_width_px").get<int>();
  spec.artery_fraction = s.at("artery_fraction").get<double>();
  spec.texture_seed = s.at("texture_seed").get<std::uint64_t>();
  spec.noise_level = s.at("noise_level").get<double>();
  spec.margin_px = s.at("margin_px").get<int>();
  spec.max_attempts = s.at("max_attempts").get<int>();
  spec.validate();
  const double px = c.at("pixel_size_microns").get<double>();
  if (!(px > 0.0)) throw InvalidArgument("pixel_size_microns must be > 0");
  const std::uint64_t seed = c.at("seed").get<std::uint64_t>();

  const std::pair<Split, std::size_t> plan[] = {
      {Split::kTrain, non_negative(c, "train_count")},
      {Split::kVal, non_negative(c, "val_count")},
      {Split::kTest, non_negative(c, "test_count")}};
  DatasetManifest manifest;
  manifest.pixel_size_microns = px;
  std::vector<std::pair<std::string, WidthTruth>> truth;
  std::size_t index = 0;
  for (const auto& [split, count] : plan) {
    for (std::size_t k = 0; k < count; ++k, ++index) {
      char id[32];
      std::snprintf(id, sizeof id, "synth_%03zu", index);
      SynthResult r = synth_generate(spec, derive_seed(seed, {index}), id, px);
      manifest.records.push_back(save_sample(r.sample, ctx.out, split));
      truth.emplace_back(id, r.truth);
    }
  }
  write_manifest(manifest, ctx.out / "manifest.csv");
  write_width_truth(ctx.out / "width_truth.tsv", truth);
  ctx.log << "synth: wrote " << index << " samples to " << ctx.out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

int cmd_train(Context& ctx) {
  const json& c = ctx.config;
  const fs::path manifest = require_path(c, "manifest");
  const std::uint64_t seed = c.at("seed").get<std::uint64_t>();
  const auto train_set = load_split(manifest, c.at("train_split").get<std::string>());
  const auto val_set = load_split(manifest, c.at("val_split").get<std::string>());
  if (train_set.empty()) throw DataError("no samples in the training split");
  if (val_set.empty()) throw DataError("no samples in the validation split");

  TrainConfig tc = train_config(c.at("train"), seed);
  tc.loss.lambda1 = c.at("loss").at("lambda1").get<double>();
  tc.loss.lambda2 = c.at("loss").at("lambda2").get<double>();
  tc.loss.lambda3 = c.at("loss").at("lambda3").get<double>();
  tc.validate();

  Model model;
  const std::string init = c.at("init_checkpoint").get<std::string>();
  if (!init.empty()) {
    model = load_checkpoint(init);
  } else {
    model = build_model(model_config(c.at("model"), train_set[0].image.channels),
                        derive_seed(seed, "init"));
  }
  if (!model.config().aux_enabled) tc.loss.lambda3 = 0.0;

  std::ofstream log_file(ctx.out / "train.log", std::ios::binary | std::ios::trunc);
  const TrainResult r = train(model, train_set, val_set, tc, epoch_logger(ctx, log_file));
  save_checkpoint(r.model, ctx.out / "checkpoint.bin");
  r.history.write_tsv(ctx.out / "history.tsv");
  ctx.log << "train: best epoch " << r.history.best_epoch << " val_mean_f1 "
          << short_num(r.history.best_val_mean_f1) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- distill

int cmd_distill(Context& ctx) {
  const json& c = ctx.config;
  const fs::path manifest = require_path(c, "manifest");
  const fs::path teacher_path = require_path(c, "teacher");
  if (!fs::exists(teacher_path)) {
    throw DataError("teacher checkpoint not found: " + teacher_path.string());
  }
  const std::uint64_t seed = c.at("seed").get<std::uint64_t>();
  const auto train_set = load_split(manifest, c.at("train_split").get<std::string>());
  const auto val_set = load_split(manifest, c.at("val_split").get<std::string>());
  if (train_set.empty()) throw DataError("no samples in the training split");
  if (val_set.empty()) throw DataError("no samples in the validation split");

  Model teacher = load_checkpoint(teacher_path);
  std::ofstream log_file(ctx.out / "train.log", std::ios::binary | std::ios::trunc);
  if (c.at("finetune").get<bool>()) {
    TrainConfig ft = train_config(c.at("finetune_train"), derive_seed(seed, "finetune"));
    ctx.log << "distill: fine-tuning teacher\n";
    log_file << "# teacher fine-tuning\n";
    const TrainResult r =
        finetune_teacher(teacher, train_set, val_set, ft, epoch_logger(ctx, log_file));
    teacher = r.model;
    save_checkpoint(teacher, ctx.out / "teacher.bin");
    r.history.write_tsv(ctx.out / "teacher_history.tsv");
    log_file << "# student distillation\n";
  }

  TrainConfig tc = train_config(c.at("train"), seed);
  tc.loss.tau = c.at("loss").at("tau").get<double>();
  tc.loss.lambda_d = c.at("loss").at("lambda_d").get<double>();
  tc.validate();
  ModelConfig sc = model_config(c.at("student"), train_set[0].image.channels);
  const Model student = build_model(sc, derive_seed(seed, "init"));
  const TrainResult r = distill_train(teacher, student, train_set, val_set, tc,
                                      epoch_logger(ctx, log_file));
  save_checkpoint(r.model, ctx.out / "student.bin");
  r.history.write_tsv(ctx.out / "history.tsv");
  ctx.log << "distill: best epoch " << r.history.best_epoch << " val_mean_f1 "
          << short_num(r.history.best_val_mean_f1) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- infer

std::vector<fs::path> png_files(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string strip_suffix(const fs::path& p, const std::string& suffix) {
  const std::string name = p.filename().string();
  return name.substr(0, name.size() - suffix.size());
}

// Two-class models predict a merged vessel class, shown like arteries.
Grid<std::uint8_t> display_labels(const Grid<std::uint8_t>& pred) { return pred; }

int cmd_infer(Context& ctx) {
  const json& c = ctx.config;
  const fs::path checkpoint = require_path(c, "checkpoint");
  const fs::path input = require_path(c, "input");
  const std::size_t patch = positive(c, "patch_size");
  const double overlap = c.at("overlap").get<double>();
  Model model = load_checkpoint(checkpoint);
  const std::vector<fs::path> images = png_files(input, ".png");
  if (images.empty()) {
    ctx.err << "warning: no .png images in " << input.string() << "; nothing to do\n";
    return kExitOk;
  }
  for (const fs::path& path : images) {
    const std::string id = strip_suffix(path, ".png");
    const Image image = load_image(path);
    const ProbabilityMap prob = sliding_window_infer(model, image, patch, overlap);
    export_probability_map(prob, ctx.out / (id + ".prob.png"));
    const Grid<std::uint8_t> pred = argmax_labels(prob);
    save_label_png(pred, ctx.out / (id + ".labels.png"));
    save_image(overlay(image, display_labels(pred)), ctx.out / (id + ".overlay.png"));
    ctx.log << "infer: " << id << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- widths

struct ClassMask {
  VesselClass tag;
  BinaryMask mask;
};

std::vector<ClassMask> class_masks_from_prob(const ProbabilityMap& prob) {
  std::vector<ClassMask> out;
  if (prob.classes == 2) {
    out.push_back({VesselClass::kVessel, threshold_mask(prob, 1, VesselClass::kVessel)});
  } else if (prob.classes >= 3) {
    out.push_back({VesselClass::kArtery, threshold_mask(prob, 1, VesselClass::kArtery)});
    out.push_back({VesselClass::kVein, threshold_mask(prob, 2, VesselClass::kVein)});
  }
  return out;
}

std::vector<ClassMask> class_masks_from_labels(const Grid<std::uint8_t>& labels) {
  std::vector<ClassMask> out;
  for (auto [tag, value] : {std::pair{VesselClass::kArtery, kArtery},
                            std::pair{VesselClass::kVein, kVein}}) {
    BinaryMask m(labels.height, labels.width, tag);
    for (std::size_t k = 0; k < labels.size(); ++k) m.values[k] = labels.values[k] == value;
    out.push_back({tag, std::move(m)});
  }
  return out;
}

double reference_mean(const WidthTruth& truth, VesselClass tag) {
  if (tag == VesselClass::kArtery) return truth.artery_mean_um;
  if (tag == VesselClass::kVein) return truth.vein_mean_um;
  double weighted = 0.0, length = 0.0;
  for (const VesselTruth& v : truth.vessels) {
    weighted += v.width_um * v.length_px;
    length += v.length_px;
  }
  return length > 0.0 ? weighted / length : 0.0;
}

int cmd_widths(Context& ctx) {
  const json& c = ctx.config;
  const fs::path input = require_path(c, "input");
  const std::string input_kind = c.at("input_kind").get<std::string>();
  if (input_kind != "probability" && input_kind != "labels") {
    throw InvalidArgument("input_kind must be 'probability' or 'labels'");
  }
  const double px = c.at("pixel_size_microns").get<double>();
  if (!(px > 0.0)) throw InvalidArgument("pixel_size_microns must be > 0");
  const std::string reference_path = c.at("reference").get<std::string>();
  std::map<std::string, WidthTruth> reference;
  if (!reference_path.empty()) {
    for (auto& [id, truth] : read_width_truth(reference_path)) reference[id] = truth;
  }

  const std::string suffix = input_kind == "probability" ? ".prob.png" : ".png";
  std::map<VesselClass, std::vector<double>> pooled;
  std::map<VesselClass, std::pair<std::vector<double>, std::vector<double>>> pairs;
  std::vector<VesselClass> order;
  std::string per_image = "id\tclass\tn\tmean_um\tstd_um";
  if (!reference.empty()) per_image += "\treference_um";
  per_image += "\n";

  for (const fs::path& path : png_files(input, suffix)) {
    const std::string id = strip_suffix(path, suffix);
    const std::vector<ClassMask> masks =
        input_kind == "probability" ? class_masks_from_prob(read_probability_map(path))
                                    : class_masks_from_labels(load_label_png(path));
    for (const ClassMask& cm : masks) {
      const WidthMap wm = width_map(cm.mask, px);
      const std::string cls = to_string(cm.tag);
      export_width_artifacts(wm, ctx.out / (id + "." + cls + ".width.png"));
      if (std::find(order.begin(), order.end(), cm.tag) == order.end()) {
        order.push_back(cm.tag);
      }
      auto& all = pooled[cm.tag];
      all.insert(all.end(), wm.diameter_samples_um.begin(), wm.diameter_samples_um.end());
      per_image += id + "\t" + cls + "\t" + std::to_string(wm.summary.n) + "\t" +
                   num(wm.summary.mean_um) + "\t" + num(wm.summary.std_um);
      if (!reference.empty()) {
        const auto it = reference.find(id);
        const double ref = it == reference.end() ? 0.0 : reference_mean(it->second, cm.tag);
        per_image += "\t" + num(ref);
        if (ref > 0.0) {
          pairs[cm.tag].first.push_back(ref);
          pairs[cm.tag].second.push_back(wm.summary.mean_um);
        }
      }
      per_image += "\n";
    }
  }
  std::sort(order.begin(), order.end());

  std::string summary = "class\tn\tmean_um\tstd_um";
  if (!reference.empty()) summary += "\tmape";
  summary += "\n";
  for (VesselClass tag : order) {
    const WidthSummary s = summarize(pooled[tag]);
    summary += std::string(to_string(tag)) + "\t" + std::to_string(s.n) + "\t" +
               num(s.mean_um) + "\t" + num(s.std_um);
    if (!reference.empty()) {
      const auto& [ref, est] = pairs[tag];
      summary += "\t" + (ref.empty() ? std::string("-") : num(mape(ref, est)));
    }
    summary += "\n";
    ctx.log << "widths: " << to_string(tag) << " n=" << s.n << " mean "
            << short_num(s.mean_um) << " um std " << short_num(s.std_um) << " um";
    if (!reference.empty() && !pairs[tag].first.empty()) {
      ctx.log << " mape " << short_num(mape(pairs[tag].first, pairs[tag].second));
    }
    ctx.log << "\n";
  }
  write_file(ctx.out / "width_summary.tsv", summary);
  write_file(ctx.out / "width_per_image.tsv", per_image);
  return kExitOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval(Context& ctx) {
  const json& c = ctx.config;
  const fs::path predictions = require_path(c, "predictions");
  const fs::path manifest = require_path(c, "manifest");
  const std::string split = c.at("split").get<std::string>();
  const auto samples = split.empty() ? load_dataset(manifest)
                                     : load_dataset(manifest, parse_split(split));
  if (samples.empty()) throw DataError("no samples to evaluate");

  std::size_t classes = 0;
  // Pooled over images: per class, scores/gt/eval stacked into tall grids.
  std::vector<Grid<double>> scores;
  std::vector<BinaryMask> preds, gts;
  BinaryMask eval_mask;
  for (const LabeledSample& s : samples) {
    const fs::path path = predictions / (s.id + ".prob.png");
    if (!fs::exists(path)) throw DataError("missing prediction " + path.string());
    const ProbabilityMap prob = read_probability_map(path);
    if (prob.height != s.labels.height || prob.width != s.labels.width) {
      throw DataError(s.id + ": prediction " + std::to_string(prob.height) + "x" +
                      std::to_string(prob.width) + " vs label " +
                      std::to_string(s.labels.height) + "x" +
                      std::to_string(s.labels.width));
    }
    if (prob.classes < 2) throw DataError(s.id + ": prediction has no classes");
    if (classes == 0) {
      classes = prob.classes;
      scores.assign(classes, Grid<double>(0, s.labels.width));
      preds.assign(classes, BinaryMask(0, s.labels.width));
      gts.assign(classes, BinaryMask(0, s.labels.width));
      eval_mask = BinaryMask(0, s.labels.width);
    }
    if (prob.classes != classes) throw DataError(s.id + ": class count differs");
    const std::size_t W = scores[0].width;
    const Grid<std::uint8_t> pred = argmax_labels(prob);
    // Images of different widths are laid out in rows of the first width.
    const auto append = [W](auto& grid, const auto& values) {
      grid.values.insert(grid.values.end(), values.begin(), values.end());
      const std::size_t pad = (W - grid.values.size() % W) % W;
      grid.values.insert(grid.values.end(), pad, 0);
      grid.height = grid.values.size() / W;
    };
    std::vector<std::uint8_t> mask_values(s.eval_mask.values.begin(), s.eval_mask.values.end());
    append(eval_mask, mask_values);
    for (std::size_t k = 1; k < classes; ++k) {
      std::vector<double> score(prob.values.begin() + k * prob.height * prob.width,
                                prob.values.begin() + (k + 1) * prob.height * prob.width);
      std::vector<std::uint8_t> p(pred.size()), g(pred.size());
      for (std::size_t q = 0; q < pred.size(); ++q) {
        p[q] = pred.values[q] == k;
        g[q] = target_class(s.labels.values[q], static_cast<int>(classes)) == k;
      }
      append(scores[k], score);
      append(preds[k], p);
      append(gts[k], g);
    }
  }

  struct Row {
    std::string name;
    double se, sp, acc, auc, dice;
  };
  std::vector<Row> rows;
  for (std::size_t k = 1; k < classes; ++k) {
    const SegmentationScores m = confusion_metrics(preds[k], gts[k], &eval_mask);
    const std::uint64_t positives = m.counts.tp + m.counts.fn;
    const std::uint64_t negatives = m.counts.tn + m.counts.fp;
    double a = std::numeric_limits<double>::quiet_NaN();
    if (positives > 0 && negatives > 0) {
      a = auc(scores[k], gts[k], &eval_mask);
    } else {
      ctx.err << "warning: AUC undefined for class " << k << " (single-class ground truth)\n";
    }
    const std::string name =
        classes == 2 ? "vessel" : (k == 1 ? "artery" : k == 2 ? "vein" : "class" + std::to_string(k));
    rows.push_back({name, m.sensitivity, m.specificity, m.accuracy, a, m.dice});
  }
  if (rows.size() > 1) {
    Row avg{"average", 0, 0, 0, 0, 0};
    std::size_t defined = 0;
    for (const Row& r : rows) {
      avg.se += r.se / rows.size();
      avg.sp += r.sp / rows.size();
      avg.acc += r.acc / rows.size();
      avg.dice += r.dice / rows.size();
      if (!std::isnan(r.auc)) {
        avg.auc += r.auc;
        ++defined;
      }
    }
    avg.auc = defined ? avg.auc / defined : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(avg);
  }

  std::string tsv = "class\tSE\tSP\tAcc\tAUC\tDice\n";
  std::ostringstream pretty;
  pretty << std::left << std::setw(10) << "class" << std::right;
  for (const char* h : {"SE", "SP", "Acc", "AUC", "Dice"}) pretty << std::setw(9) << h;
  pretty << "\n";
  for (const Row& r : rows) {
    tsv += r.name + "\t" + num(r.se) + "\t" + num(r.sp) + "\t" + num(r.acc) + "\t" +
           num(r.auc) + "\t" + num(r.dice) + "\n";
    pretty << std::left << std::setw(10) << r.name << std::right << std::fixed
           << std::setprecision(4);
    for (double v : {r.se, r.sp, r.acc, r.auc, r.dice}) pretty << std::setw(9) << v;
    pretty << "\n";
  }
  write_file(ctx.out / "metrics.tsv", tsv);
  ctx.log << pretty.str();
  return kExitOk;
}

using Handler = int (*)(Context&);

const std::map<std::string, std::pair<Handler, const char*>>& commands() {
  static const std::map<std::string, std::pair<Handler, const char*>> table = {
      {"synth", {cmd_synth, "Generate a synthetic vessel dataset with width ground truth"}},
      {"train", {cmd_train, "Train a segmentation model with the hybrid loss"}},
      {"distill", {cmd_distill, "Distill a student from a (fine-tuned) teacher"}},
      {"infer", {cmd_infer, "Sliding-window probability maps and overlays"}},
      {"widths", {cmd_widths, "Vessel width maps, class statistics and MAPE"}},
      {"eval", {cmd_eval, "SE/SP/Acc/AUC/Dice per class"}},
  };
  return table;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"segravir: retinal artery/vein segmentation and width toolkit"};
  app.require_subcommand(1);
  struct Flags {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
  };
  std::map<std::string, Flags> flags;
  for (const auto& [name, entry] : commands()) {
    CLI::App* sub = app.add_subcommand(name, entry.second);
    Flags& f = flags[name];
    sub->add_option("--config", f.config, "JSON configuration file");
    sub->add_option("--set", f.sets, "Override a config key: key.path=value");
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--threads", f.threads, "Worker threads (results do not depend on it)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const Flags& f = flags[name];
  try {
    json config = default_config(name);
    if (!f.config.empty()) {
      std::ifstream in(f.config);
      if (!in) throw InvalidArgument("cannot open config " + f.config);
      const json user = json::parse(in, nullptr, false);
      if (user.is_discarded()) throw InvalidArgument("config " + f.config + " is not valid JSON");
      merge_config(config, user);
    }
    for (const std::string& s : f.sets) apply_override(config, s);
    if (f.seed) config["seed"] = *f.seed;
    if (f.out) config["out"] = *f.out;
    if (f.threads) config["threads"] = *f.threads;
    if (config.at("threads").get<long long>() < 1) {
      throw InvalidArgument("threads must be >= 1");
    }
    const fs::path out_dir = config.at("out").get<std::string>();
    if (out_dir.empty()) throw InvalidArgument("out must not be empty");
    fs::create_directories(out_dir);
    write_file(out_dir / "resolved_config.json", config.dump(2) + "\n");
    Context ctx{config, out_dir, out, err};
    return commands().at(name).first(ctx);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace segravir::cli
