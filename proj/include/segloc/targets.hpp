// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "segloc/data.hpp"
#include "segloc/model.hpp"
#include "segloc/tasks.hpp"

namespace segloc {

/// Anchor times per pyramid level plus each level's regression bucket.
struct AnchorGrid {
  std::vector<int> lengths;
  std::vector<double> strides;  // seconds per step, sigma_l
  std::vector<std::vector<double>> times;
  std::vector<double> range_lo;  // seconds; range_hi.back() is +inf
  std::vector<double> range_hi;

  int levels() const { return static_cast<int>(lengths.size()); }
  int total() const;
  int offset(int level) const;
};

/// sigma_l = clip_len * 2^l / fps; anchor i of level l sits at
/// (i + 0.5) * sigma_l. Buckets: [0, base), [base, 2 base), ..., the last
/// one open ended.
AnchorGrid build_anchor_grid(const std::vector<int>& lengths, double fps, int clip_len, double base_range = 4.0);

struct TrainingTargets {
  std::vector<std::uint8_t> valid;     // anchor usable at all
  std::vector<std::uint8_t> positive;
  std::vector<int> segment;            // assigned annotation, -1 if none
  std::vector<int> label;              // class of the assigned annotation, -1 if none
  std::vector<double> offsets;         // [N, 2] (ds, de) in stride units, 0 at negatives
  std::vector<std::int8_t> saliency;   // level-0 steps: 1 inside, 0 outside, -1 ignored
  int num_positive = 0;
  int unassigned = 0;                  // annotations that captured no anchor
};

struct AssignConfig {
  double center_radius = 1.5;  // stride units
};

/// Center sampling with scale buckets and shortest-segment tie-break.
/// `anchor_mask` (empty means all valid) marks usable anchors. Saliency
/// labels are filled for level 0 when `with_saliency` is set.
TrainingTargets assign_targets(const std::vector<Annotation>& annotations, const AnchorGrid& grid,
                               const std::vector<std::uint8_t>& anchor_mask, const AssignConfig& cfg = {},
                               bool with_saliency = false);

struct LossConfig {
  double alpha = 0.25;
  double gamma = 2.0;
  double lambda_reg = 1.0;
  double lambda_sal = 0.5;
  double margin = 0.2;
};

/// Sigmoid focal loss over the confidence column at valid anchors, plus the
/// class columns at positive anchors (TAL), divided by max(1, #positives).
template <class T>
ag::Var classification_loss(ag::Graph<T>& g, const DenseOutputs& d, const TrainingTargets& t,
                            const LossConfig& cfg = {});

/// Mean over positive anchors of 1 - IoU between predicted and target
/// intervals around the anchor, in stride units.
template <class T>
ag::Var regression_loss(ag::Graph<T>& g, const DenseOutputs& d, const TrainingTargets& t);

/// Margin ranking between every inside and every outside level-0 step.
template <class T>
ag::Var saliency_loss(ag::Graph<T>& g, const DenseOutputs& d, const TrainingTargets& t, const LossConfig& cfg = {});

struct LossParts {
  ag::Var total;
  double cls = 0.0;
  double reg = 0.0;
  double sal = 0.0;
  double value = 0.0;
};

template <class T>
LossParts total_loss(ag::Graph<T>& g, const DenseOutputs& d, const TrainingTargets& t, const LossConfig& cfg = {});

}  // namespace segloc
