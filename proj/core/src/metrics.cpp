// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/metrics.hpp"

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "segravir/error.hpp"

namespace segravir {

namespace {

void check_shapes(const Grid<std::uint8_t>& a, const auto& b,
                  const BinaryMask* eval_mask, const char* name) {
  if (!a.same_shape(b) || (eval_mask && !a.same_shape(*eval_mask))) {
    throw InvalidArgument(std::string(name) + ": shape mismatch (" +
                          std::to_string(a.height) + "x" +
                          std::to_string(a.width) + " vs " +
                          std::to_string(b.height) + "x" +
                          std::to_string(b.width) + ")");
  }
}

double ratio_or_vacuous(std::uint64_t num, std::uint64_t den,
                        bool prediction_agrees) {
  if (den == 0) return prediction_agrees ? 1.0 : 0.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

SegmentationScores confusion_metrics(const BinaryMask& pred,
                                     const BinaryMask& gt,
                                     const BinaryMask* eval_mask) {
  check_shapes(gt, pred, eval_mask, "confusion_metrics");
  SegmentationScores s;
  ConfusionCounts& c = s.counts;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    if (eval_mask && !eval_mask->values[k]) continue;
    const bool p = pred.values[k] != 0;
    const bool g = gt.values[k] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  s.sensitivity = ratio_or_vacuous(c.tp, c.tp + c.fn, c.fp == 0);
  s.specificity = ratio_or_vacuous(c.tn, c.tn + c.fp, c.fn == 0);
  s.accuracy = ratio_or_vacuous(c.tp + c.tn, c.total(), true);
  s.dice = ratio_or_vacuous(2 * c.tp, 2 * c.tp + c.fp + c.fn, true);
  return s;
}

double auc(const Grid<double>& score, const BinaryMask& gt,
           const BinaryMask* eval_mask) {
  check_shapes(gt, score, eval_mask, "auc");
  std::vector<std::pair<double, bool>> items;
  items.reserve(gt.size());
  std::uint64_t positives = 0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    if (eval_mask && !eval_mask->values[k]) continue;
    const bool g = gt.values[k] != 0;
    positives += g;
    items.emplace_back(score.values[k], g);
  }
  const std::uint64_t negatives = items.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw InvalidArgument("auc: ground truth has a single class (" +
                          std::to_string(positives) + " positives, " +
                          std::to_string(negatives) + " negatives)");
  }
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Each positive earns the negatives strictly below it plus half the tied
  // negatives.
  double wins = 0.0;
  std::uint64_t negatives_below = 0;
  for (std::size_t start = 0; start < items.size();) {
    std::size_t end = start;
    std::uint64_t group_pos = 0;
    std::uint64_t group_neg = 0;
    while (end < items.size() && items[end].first == items[start].first) {
      (items[end].second ? group_pos : group_neg) += 1;
      ++end;
    }
    wins += static_cast<double>(group_pos) *
            (static_cast<double>(negatives_below) +
             0.5 * static_cast<double>(group_neg));
    negatives_below += group_neg;
    start = end;
  }
  return wins / (static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace segravir
