// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_METRICS_HPP_
#define SEGRAVIR_METRICS_HPP_

#include <cstdint>

#include "segravir/grid.hpp"

namespace segravir {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct SegmentationScores {
  ConfusionCounts counts;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double accuracy = 0.0;
  double dice = 0.0;
};

// SE = TP/(TP+FN), SP = TN/(TN+FP), Acc = (TP+TN)/total,
// Dice = 2TP/(2TP+FP+FN). A ratio whose denominator is zero is 1 when the
// prediction agrees (nothing predicted where nothing exists) and 0 otherwise.
// `eval_mask` (may be null) restricts counting to its nonzero pixels.
SegmentationScores confusion_metrics(const BinaryMask& pred,
                                     const BinaryMask& gt,
                                     const BinaryMask* eval_mask = nullptr);

// Area under the ROC curve of `score` against `gt`, equal to the
// Mann-Whitney probability that a positive outscores a negative with ties
// counting one half. Throws InvalidArgument unless both classes occur.
double auc(const Grid<double>& score, const BinaryMask& gt,
           const BinaryMask* eval_mask = nullptr);

}  // namespace segravir

#endif  // SEGRAVIR_METRICS_HPP_
