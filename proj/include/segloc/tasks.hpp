// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "segloc/postprocess.hpp"
#include "segloc/segments.hpp"

namespace segloc {

enum class TaskKind { TAL, TVG, MR, GEBD };

std::string task_name(TaskKind k);
/// Accepts "tal", "tvg", "mr", "gebd"; throws ConfigError otherwise.
TaskKind parse_task(const std::string& s);

/// How one of the four localization tasks maps onto segment prediction.
struct TaskSpec {
  TaskKind kind = TaskKind::TAL;
  int num_classes = 0;
  bool uses_text = false;
  bool uses_saliency = false;
  int topk = 2000;
  postprocess::Config nms;
  // GEBD boundary extraction: minimum separation as a fraction of the
  // duration, and the score (relative to the best prediction of the video)
  // a prediction needs to contribute boundaries.
  double gebd_min_sep_frac = 0.05;
  double gebd_score_ratio = 0.5;

  bool segment_task() const { return kind != TaskKind::GEBD; }
  /// Throws ConfigError when the kind/classes/text flags are inconsistent.
  void validate() const;
};

/// Defaults: top-k 100 for TVG and GEBD, 2000 for TAL and MR; class-aware
/// suppression only for TAL; saliency only for MR.
TaskSpec make_task_spec(TaskKind kind, int num_classes = 0);

struct TaskOutput {
  std::vector<Prediction> predictions;     // segment tasks
  std::optional<BoundarySet> boundaries;   // GEBD
  std::vector<double> saliency;            // MR, per feature step, filled by the caller
};

/// Post-processes decoded, clipped predictions of one video (or one query).
TaskOutput finalize_predictions(const TaskSpec& spec, const std::vector<Prediction>& raw, double duration);

}  // namespace segloc
