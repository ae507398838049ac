// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "segloc/segments.hpp"

namespace segloc::metrics {

/// Ground-truth instance for detection-style evaluation. Class-agnostic
/// tasks use label 0 throughout.
struct LabeledSegment {
  Segment segment;
  int label = 0;
};

inline const std::vector<double> kThumosThresholds{0.3, 0.4, 0.5, 0.6, 0.7};
inline const std::vector<double> kSweepThresholds{0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
inline const std::vector<double> kRelDisThresholds{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};

struct DetectionResult {
  std::vector<double> thresholds;
  /// ap[t][c]; classes without ground truth hold no value.
  std::vector<std::vector<std::optional<double>>> ap;
  std::vector<double> map;  // per threshold, mean over classes with ground truth
  double average_map = 0.0;
  std::vector<int> excluded_classes;
  int num_predictions = 0;
  int num_ground_truths = 0;
};

/// Score-ranked greedy matching per class and threshold (each prediction
/// takes the highest-tIoU unmatched ground truth of its class and video
/// when that tIoU reaches the threshold), AP from the precision envelope
/// integrated over all recall points. Predictions without a label count as
/// class 0. Equal scores keep video order, then input order.
DetectionResult detection_map(const std::vector<std::vector<Prediction>>& preds,
                              const std::vector<std::vector<LabeledSegment>>& gts,
                              const std::vector<double>& thresholds, int num_classes);

/// detection_map over the 0.5:0.05:0.95 grid.
DetectionResult average_map_sweep(const std::vector<std::vector<Prediction>>& preds,
                                  const std::vector<std::vector<LabeledSegment>>& gts, int num_classes);

/// Area under the precision envelope for a ranked TP/FP sequence.
double interpolated_ap(const std::vector<bool>& is_tp, int num_positives);

/// Fraction of queries whose first k ranked predictions contain one with
/// tIoU >= threshold against that query's ground truth.
double recall_at_k(const std::vector<std::vector<Prediction>>& ranked, const std::vector<Segment>& gt, int k,
                   double tiou_threshold);

struct BoundaryCounts {
  int matched = 0;
  int predicted = 0;
  int ground_truth = 0;
};

/// Interior boundaries only. Predictions in time order, each matched to the
/// earliest unmatched ground-truth boundary within the Rel.Dis. threshold.
/// For 1-D threshold matching this greedy attains the maximum matching.
BoundaryCounts match_boundaries(const BoundarySet& pred, const BoundarySet& gt, double threshold, double norm_len);

double f1_from_counts(const BoundaryCounts& c);

struct F1Result {
  std::vector<double> thresholds;
  std::vector<double> f1;
  std::vector<double> precision;
  std::vector<double> recall;
  double average = 0.0;
};

F1Result gebd_f1(const BoundarySet& pred, const BoundarySet& gt, const std::vector<double>& thresholds,
                 double norm_len);

/// Counts pooled over videos before computing F1, one normalization length
/// per video.
F1Result gebd_f1_dataset(const std::vector<BoundarySet>& preds, const std::vector<BoundarySet>& gts,
                         const std::vector<double>& thresholds, const std::vector<double>& norm_lens);

}  // namespace segloc::metrics
