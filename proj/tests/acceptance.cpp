// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "grad_fixtures.hpp"
#include "oracles.hpp"
#include "segravir/checkpoint.hpp"
#include "segravir/cli.hpp"
#include "segravir/inference.hpp"
#include "segravir/losses.hpp"
#include "segravir/metrics.hpp"
#include "segravir/morphology.hpp"
#include "segravir/ops.hpp"
#include "segravir/synth.hpp"
#include "segravir/training.hpp"
#include "segravir/width.hpp"

namespace segravir {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

const fs::path kData = SEGRAVIR_TEST_DATA_DIR;
const fs::path kConfigs = SEGRAVIR_CONFIG_DIR;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, const char* f = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::Run(args, out, err);
  if (code != 0) std::cerr << "segravir " << args[0] << " exited " << code << ": " << err.str();
  return code;
}

// Rows of a TSV with a header, as column -> value maps.
std::vector<std::map<std::string, std::string>> read_tsv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string f; std::getline(ss, f, '\t');) out.push_back(f);
    return out;
  };
  if (std::getline(in, line)) header = split(line);
  while (std::getline(in, line)) {
    const auto f = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t k = 0; k < header.size() && k < f.size(); ++k) row[header[k]] = f[k];
    rows.push_back(row);
  }
  return rows;
}

double max_abs(std::span<const double> a, const std::vector<double>& b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------

Verdict grad_suite() {
  Verdict v;
  const auto t0 = Clock::now();
  double op_worst = 0.0, loss_worst = 0.0;
  const auto ops_f = fixtures::op_fixtures();
  const auto loss_f = fixtures::loss_fixtures();
  for (const auto& f : ops_f) {
    const double e = grad_check(f.fn, f.inputs).max_relative_error;
    op_worst = std::max(op_worst, e);
    v.require(e < 1e-4, "op " + f.name);
  }
  for (const auto& f : loss_f) {
    const double e = grad_check(f.fn, f.inputs).max_relative_error;
    loss_worst = std::max(loss_worst, e);
    v.require(e < 1e-6, "loss " + f.name);
  }
  const double t = seconds_since(t0);
  v.require(ops_f.size() >= 20 && loss_f.size() >= 20, "fixture count");
  v.require(t < 120.0, "runtime");
  v.detail << ops_f.size() << " op fixtures worst " << fmt(op_worst) << ", " << loss_f.size()
           << " loss fixtures worst " << fmt(loss_worst) << ", " << fmt(t, "%.1f") << " s";
  return v;
}

Verdict oracle_equivalences() {
  Verdict v;
  std::mt19937_64 gen(2026);
  double conv = 0.0, trconv = 0.0, edt = 0.0, auc_err = 0.0, loss_err = 0.0;
  for (int t = 0; t < 30; ++t) {
    std::uniform_int_distribution<int> d(1, 3), hw(4, 14), kk(1, 5);
    const std::size_t k = kk(gen), C = d(gen), F = d(gen);
    const int stride = 1 + t % 2, pad = int(k) / 2;
    const Tensor x = oracle::random_tensor({std::size_t(d(gen)), C, std::size_t(hw(gen)) + k,
                                            std::size_t(hw(gen)) + k}, gen);
    const Tensor w = oracle::random_tensor({F, C, k, k}, gen);
    const Tensor b = oracle::random_tensor({F}, gen);
    conv = std::max(conv, max_abs(ops::conv2d(x, w, b, stride, pad).data(),
                                  oracle::conv2d(x, w, b, stride, pad)));
    const int s = 2 + t % 2;
    const Tensor tw = oracle::random_tensor({C, F, std::size_t(s), std::size_t(s)}, gen);
    trconv = std::max(trconv, max_abs(ops::transposed_conv2d(x, tw, b, s).data(),
                                      oracle::transposed_conv2d(x, tw, b, s)));
  }
  for (int t = 0; t < 200; ++t) {
    const BinaryMask m = oracle::random_mask(gen, 8 + t % 25, 6 + (t * 11) % 27);
    const Grid<double> got = distance_transform(m), want = oracle::brute_edt(m);
    for (std::size_t q = 0; q < m.size(); ++q) {
      if (std::isinf(want.values[q]) != std::isinf(got.values[q])) edt = INFINITY;
      if (!std::isinf(want.values[q])) edt = std::max(edt, std::abs(got.values[q] - want.values[q]));
    }
  }
  bool counts_exact = true;
  std::bernoulli_distribution coin(0.35);
  std::uniform_int_distribution<int> level(0, 12);
  for (int t = 0; t < 50; ++t) {
    BinaryMask p(20, 17), g(20, 17), e(20, 17);
    Grid<double> score(20, 17);
    ConfusionCounts want;
    std::vector<double> pos, neg;
    for (std::size_t q = 0; q < p.size(); ++q) {
      p.values[q] = coin(gen);
      g.values[q] = coin(gen);
      e.values[q] = t % 2 ? 1 : !coin(gen);
      score.values[q] = level(gen) / 12.0;
      if (!e.values[q]) continue;
      want.tp += p.values[q] && g.values[q];
      want.fp += p.values[q] && !g.values[q];
      want.tn += !p.values[q] && !g.values[q];
      want.fn += !p.values[q] && g.values[q];
      (g.values[q] ? pos : neg).push_back(score.values[q]);
    }
    counts_exact = counts_exact && confusion_metrics(p, g, &e).counts == want;
    auc_err = std::max(auc_err, std::abs(auc(score, g, &e) - oracle::mann_whitney(pos, neg)));
  }
  for (int t = 0; t < 25; ++t) {
    const std::size_t N = 1 + t % 3, K = 2 + t % 2, H = 3 + t % 5, W = 4;
    const Tensor probs = ops::softmax(oracle::random_tensor({N, K, H, W}, gen, -3, 3), 1);
    const Tensor target = one_hot(fixtures::random_labels(N * H * W, int(K), gen), N, K, H, W);
    const std::vector<double> pv(probs.data().begin(), probs.data().end());
    const std::vector<double> gv(target.data().begin(), target.data().end());
    loss_err = std::max(loss_err, std::abs(dice_loss(probs, target).item() -
                                           oracle::dice_loss(pv, gv, N, K, H * W, kDiceSmoothing)));
    loss_err = std::max(loss_err, std::abs(cross_entropy_loss(probs, target).item() -
                                           oracle::cross_entropy(pv, gv, N, K, H * W)));
  }
  v.require(conv < 1e-12, "conv");
  v.require(trconv < 1e-12, "transposed conv");
  v.require(edt < 1e-9, "EDT");
  v.require(auc_err < 1e-9, "AUC");
  v.require(counts_exact, "confusion counts");
  v.require(loss_err < 1e-12, "Dice/CE");
  v.detail << "conv " << fmt(conv) << ", trconv " << fmt(trconv) << ", EDT(200 masks) " << fmt(edt)
           << ", AUC " << fmt(auc_err) << ", counts " << (counts_exact ? "exact" : "differ")
           << ", Dice/CE " << fmt(loss_err);
  return v;
}

Verdict analytic_losses() {
  Verdict v;
  const Tensor uniform = ops::softmax(Tensor::zeros({2, 3, 8, 8}), 1);
  std::mt19937_64 gen(7);
  const Tensor target = one_hot(fixtures::random_labels(128, 3, gen), 2, 3, 8, 8);
  const double ce_uniform = cross_entropy_loss(uniform, target).item();
  const double dice_perfect = dice_loss(target, target).item();
  const double ce_perfect = cross_entropy_loss(target, target).item();
  const Tensor z = oracle::random_tensor({2, 3, 8, 8}, gen, -4, 4);
  const double kl_same = std::abs(kl_divergence(soften(z, 3.0), soften(z, 3.0)).item());
  v.require(std::abs(ce_uniform - std::log(3.0)) < 1e-6, "CE uniform");
  v.require(dice_perfect < 1e-6, "Dice perfect");
  v.require(ce_perfect < 1e-10, "CE perfect");
  v.require(kl_same < 1e-12, "KL identical");
  v.detail << "|CE-ln3| " << fmt(std::abs(ce_uniform - std::log(3.0))) << ", Dice(P=G) "
           << fmt(dice_perfect) << ", CE(P=G) " << fmt(ce_perfect) << ", KL " << fmt(kl_same);
  return v;
}

Verdict width_accuracy(const fs::path& work) {
  Verdict v;
  const auto t0 = Clock::now();
  double bar_worst = 0.0, disk_worst = 0.0;
  const double angles[] = {0.0, std::atan(0.5), M_PI / 4};
  for (int w = 3; w <= 15; ++w) {
    for (double a : angles) {
      for (double off : {0.0, 0.35}) {
        const WidthMap m = width_map(oracle::bar(80, 40 + off, 40 - off, a, w, 48), 1.0);
        bar_worst = std::max(bar_worst, m.summary.n ? std::abs(m.summary.mean_um - w) : INFINITY);
      }
    }
    for (double off : {0.0, 0.5}) {
      const WidthMap m = width_map(oracle::disk(40, 20 + off, 20, w), 1.0);
      disk_worst = std::max(disk_worst, m.summary.n ? std::abs(m.summary.mean_um - w) : INFINITY);
    }
  }
  const fs::path fixture = kData / "width_fixture";
  const int code = cli({"widths", "--out", (work / "widths").string(), "--set",
                        "input=" + (fixture / "labels").string(), "--set", "input_kind=labels",
                        "--set", "reference=" + (fixture / "width_truth.tsv").string()});
  double mape_worst = INFINITY;
  if (code == 0) {
    mape_worst = 0.0;
    const auto rows = read_tsv(work / "widths" / "width_summary.tsv");
    if (rows.empty()) mape_worst = INFINITY;
    for (const auto& r : rows) mape_worst = std::max(mape_worst, std::stod(r.at("mape")));
  }
  const double t = seconds_since(t0);
  v.require(bar_worst <= 1.0, "bars");
  v.require(disk_worst <= 1.0, "disks");
  v.require(mape_worst < 0.05, "fixture MAPE");
  v.require(t < 60.0, "runtime");
  v.detail << "bars worst " << fmt(bar_worst, "%.3f") << " px, disks worst "
           << fmt(disk_worst, "%.3f") << " px, fixture MAPE (worst class) "
           << fmt(mape_worst, "%.4f") << ", " << fmt(t, "%.1f") << " s";
  return v;
}

Verdict overfit(const fs::path& work) {
  Verdict v;
  const auto t0 = Clock::now();
  const std::string data = (work / "overfit_data").string();
  const std::string out = (work / "overfit").string();
  const bool ran = cli({"synth", "--out", data, "--set", "train_count=4"}) == 0 &&
                   cli({"train", "--config", (kConfigs / "overfit.json").string(), "--set",
                        "manifest=" + data + "/manifest.csv", "--out", out}) == 0;
  const double t = seconds_since(t0);
  v.require(ran, "pipeline ran");
  if (!ran) return v;
  const auto rows = read_tsv(fs::path(out) / "history.tsv");
  double best = 0.0;
  for (const auto& r : rows) {
    if (r.at("val_mean_f1") != "-") best = std::max(best, std::stod(r.at("val_mean_f1")));
  }
  const double first = std::stod(rows.front().at("l2"));
  const double last = std::stod(rows.back().at("l2"));
  v.require(best >= 0.95, "train Dice");
  v.require(first >= 10.0 * last, "recon drop");
  v.require(t < 600.0, "runtime");
  v.detail << rows.size() << " epochs, best train fg Dice " << fmt(best, "%.4f") << ", recon "
           << fmt(first, "%.3f") << " -> " << fmt(last, "%.4f") << " (" << fmt(first / last, "%.1f")
           << "x), " << fmt(t, "%.0f") << " s";
  return v;
}

Verdict distillation(const fs::path& work) {
  Verdict v;
  const fs::path teacher = work / "overfit" / "checkpoint.bin";
  const std::string before = slurp(teacher);
  v.require(!before.empty(), "teacher checkpoint from criterion 5");
  if (before.empty()) return v;
  const auto t0 = Clock::now();
  const std::string out = (work / "distill").string();
  const bool ran = cli({"distill", "--config", (kConfigs / "distill.json").string(), "--set",
                        "manifest=" + (work / "overfit_data" / "manifest.csv").string(), "--set",
                        "teacher=" + teacher.string(), "--out", out}) == 0;
  const double t = seconds_since(t0);
  v.require(ran, "distill ran");
  double best = 0.0;
  if (ran) {
    for (const auto& r : read_tsv(fs::path(out) / "history.tsv")) {
      if (r.at("val_mean_f1") != "-") best = std::max(best, std::stod(r.at("val_mean_f1")));
    }
  }
  const bool teacher_same = slurp(teacher) == before;

  // lambda_d = 0 against plain cross-entropy training.
  SynthSpec spec;
  spec.height = spec.width = 32;
  spec.vessel_count = 2;
  std::vector<LabeledSample> tr, va;
  for (int k = 0; k < 2; ++k) tr.push_back(synth_generate(spec, 300 + k, "a" + std::to_string(k)).sample);
  va.push_back(synth_generate(spec, 400, "b").sample);
  ModelConfig small;
  small.base_channels = 2;
  small.num_classes = 2;
  small.aux_enabled = false;
  const Model t_model = build_model(small, 1), s_model = build_model(small, 2);
  TrainConfig c;
  c.patch_size = 32;
  c.batch_size = 2;
  c.epochs = 4;
  c.validation_interval = 2;
  c.loss.lambda_d = 0.0;
  const TrainResult d = distill_train(t_model, s_model, tr, va, c);
  TrainConfig plain = c;
  plain.loss.lambda1 = 0.0;
  plain.loss.lambda2 = 1.0;
  plain.loss.lambda3 = 0.0;
  const TrainResult p = train(s_model, tr, va, plain);
  bool identical = serialize_model(d.model) == serialize_model(p.model) &&
                   d.history.epochs.size() == p.history.epochs.size() &&
                   d.history.best_epoch == p.history.best_epoch;
  for (std::size_t e = 0; identical && e < d.history.epochs.size(); ++e) {
    const EpochRecord &a = d.history.epochs[e], &b = p.history.epochs[e];
    identical = a.lr == b.lr && a.loss == b.loss && a.cross_entropy == b.cross_entropy &&
                a.validated == b.validated && a.val_f1 == b.val_f1;
  }

  v.require(best >= 0.90, "student Dice");
  v.require(identical, "lambda_d=0 bit-identical");
  v.require(teacher_same, "teacher bytes unchanged");
  v.detail << "student best Dice " << fmt(best, "%.4f") << " (tau 3, lambda_d 0.1, "
           << fmt(t, "%.0f") << " s), lambda_d=0 " << (identical ? "bit-identical" : "differs")
           << ", teacher " << (teacher_same ? "unchanged" : "modified");
  return v;
}

Verdict schedule_and_selection() {
  Verdict v;
  SynthSpec spec;
  spec.height = spec.width = 32;
  spec.vessel_count = 2;
  std::vector<LabeledSample> tr{synth_generate(spec, 500, "t").sample};
  std::vector<LabeledSample> va{synth_generate(spec, 501, "v").sample};
  ModelConfig mc;
  mc.base_channels = 2;
  TrainConfig c;
  c.patch_size = 32;
  c.batch_size = 1;
  c.epochs = 101;
  c.validation_interval = 5;
  c.lr0 = 0.001;
  c.lr_halving_period_epochs = 50;
  const TrainResult r = train(build_model(mc, 3), tr, va, c);
  const std::map<std::size_t, double> want{{0, 0.001}, {49, 0.001}, {50, 0.0005}, {100, 0.00025}};
  bool lr_ok = r.history.epochs.size() == 101;
  for (auto [e, lr] : want) lr_ok = lr_ok && r.history.epochs[e].lr == lr;
  double best = -1.0;
  std::size_t validated = 0;
  for (const EpochRecord& e : r.history.epochs) {
    if (!e.validated) continue;
    ++validated;
    best = std::max(best, e.val_mean_f1);
  }
  Model chosen = r.model;
  const auto f1 = foreground_f1(chosen, va, c.patch_size, c.overlap);
  const double chosen_f1 = (f1[0] + f1[1]) / 2.0;
  v.require(lr_ok, "lr schedule");
  v.require(chosen_f1 == best && r.history.best_val_mean_f1 == best, "selection");
  v.detail << "lr(0,49,50,100) = " << r.history.epochs[0].lr << ", " << r.history.epochs[49].lr
           << ", " << r.history.epochs[50].lr << ", " << r.history.epochs[100].lr
           << "; returned checkpoint mean-F1 " << fmt(chosen_f1, "%.6f") << " vs max of "
           << validated << " validations " << fmt(best, "%.6f");
  return v;
}

// Runs the full pipeline in `dir` with paths relative to it.
bool pipeline(const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path cwd = fs::current_path();
  fs::current_path(dir);
  const bool ok =
      cli({"synth", "--seed", "11", "--out", "data", "--set", "train_count=2", "--set",
           "val_count=1", "--set", "test_count=1", "--set", "synth.height=48", "--set",
           "synth.width=48", "--set", "synth.vessel_count=3"}) == 0 &&
      cli({"train", "--seed", "11", "--out", "train", "--set", "manifest=data/manifest.csv",
           "--set", "model.base_channels=4", "--set", "train.patch_size=32", "--set",
           "train.batch_size=2", "--set", "train.epochs=4", "--set",
           "train.validation_interval=2"}) == 0 &&
      cli({"infer", "--out", "pred", "--set", "checkpoint=train/checkpoint.bin", "--set",
           "input=data/images", "--set", "patch_size=32"}) == 0 &&
      cli({"widths", "--out", "widths", "--set", "input=pred", "--set",
           "reference=data/width_truth.tsv"}) == 0 &&
      cli({"eval", "--out", "eval", "--set", "predictions=pred", "--set",
           "manifest=data/manifest.csv"}) == 0;
  fs::current_path(cwd);
  return ok;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

Verdict determinism(const fs::path& work) {
  Verdict v;
  const bool ran = pipeline(work / "run_a") && pipeline(work / "run_b");
  v.require(ran, "pipelines ran");
  if (!ran) return v;
  const auto a = tree(work / "run_a"), b = tree(work / "run_b");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      ++differing;
      v.detail << " differs: " << name;
    }
  }
  v.require(a.size() == b.size() && differing == 0, "byte-identical");
  v.detail << a.size() << " files compared, " << differing << " differ";
  return v;
}

Verdict skeleton_and_tiling() {
  Verdict v;
  std::mt19937_64 gen(909);
  std::size_t bad_subset = 0, bad_idem = 0, bad_count = 0;
  for (int t = 0; t < 500; ++t) {
    const BinaryMask m = oracle::random_mask(gen, 24 + t % 41, 24 + (t * 13) % 41);
    const BinaryMask s = skeletonize(m);
    for (std::size_t q = 0; q < m.size(); ++q) {
      if (s.values[q] && !m.values[q]) {
        ++bad_subset;
        break;
      }
    }
    bad_idem += !(skeletonize(s) == s);
    bad_count += oracle::flood_components(s) != oracle::flood_components(m);
  }
  bool tile_exact = true;
  for (int c : {1, 3}) {
    ModelConfig mc;
    mc.input_channels = c;
    mc.base_channels = 4;
    Model m = build_model(mc, 17 + c);
    Image im{std::size_t(c), 64, 64, std::vector<double>(std::size_t(c) * 64 * 64)};
    std::uniform_real_distribution<double> u(0, 1);
    for (double& x : im.values) x = u(gen);
    tile_exact = tile_exact && sliding_window_infer(m, im, 64, 0.5).values == direct_infer(m, im).values;
  }
  v.require(bad_subset == 0, "subset");
  v.require(bad_idem == 0, "idempotence");
  v.require(bad_count == 0, "component count");
  v.require(tile_exact, "full-image tile");
  v.detail << "500 masks: subset violations " << bad_subset << ", non-idempotent " << bad_idem
           << ", component mismatches " << bad_count << "; full-image tile "
           << (tile_exact ? "bit-exact" : "differs");
  return v;
}

}  // namespace
}  // namespace segravir

int main() {
  using namespace segravir;
  const fs::path work = fs::temp_directory_path() / "segravir_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {"gradient checks", grad_suite},
      {"oracle equivalences", oracle_equivalences},
      {"analytic loss values", analytic_losses},
      {"width accuracy", [&] { return width_accuracy(work); }},
      {"overfit", [&] { return overfit(work); }},
      {"distillation", [&] { return distillation(work); }},
      {"lr schedule and selection", schedule_and_selection},
      {"pipeline determinism", [&] { return determinism(work); }},
      {"skeleton properties and tiling", skeleton_and_tiling},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Verdict v;
    try {
      v = criteria[k].run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << k + 1 << " (" << criteria[k].name
              << "): " << v.detail.str() << std::endl;
  }
  fs::remove_all(work);
  return failures == 0 ? 0 : 1;
}
