// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/tasks.hpp"

#include <algorithm>

#include "segloc/error.hpp"

namespace segloc {

std::string task_name(TaskKind k) {
  switch (k) {
    case TaskKind::TAL:
      return "tal";
    case TaskKind::TVG:
      return "tvg";
    case TaskKind::MR:
      return "mr";
    case TaskKind::GEBD:
      return "gebd";
  }
  return "?";
}

TaskKind parse_task(const std::string& s) {
  if (s == "tal") return TaskKind::TAL;
  if (s == "tvg") return TaskKind::TVG;
  if (s == "mr") return TaskKind::MR;
  if (s == "gebd") return TaskKind::GEBD;
  throw ConfigError("unknown task '" + s + "' (expected tal, tvg, mr or gebd)");
}

void TaskSpec::validate() const {
  switch (kind) {
    case TaskKind::TAL:
      if (num_classes < 1 || uses_text) throw ConfigError("TAL needs at least one class and no text");
      break;
    case TaskKind::TVG:
    case TaskKind::MR:
      if (!uses_text || num_classes != 0) throw ConfigError(task_name(kind) + " needs text and no classes");
      break;
    case TaskKind::GEBD:
      if (num_classes != 0 || uses_text) throw ConfigError("GEBD takes no classes and no text");
      break;
  }
  if (topk < 0) throw ConfigError("topk must be non-negative");
}

TaskSpec make_task_spec(TaskKind kind, int num_classes) {
  TaskSpec s;
  s.kind = kind;
  s.num_classes = kind == TaskKind::TAL ? num_classes : 0;
  s.uses_text = kind == TaskKind::TVG || kind == TaskKind::MR;
  s.uses_saliency = kind == TaskKind::MR;
  s.topk = (kind == TaskKind::TVG || kind == TaskKind::GEBD) ? 100 : 2000;
  s.nms.class_aware = kind == TaskKind::TAL;
  s.validate();
  return s;
}

TaskOutput finalize_predictions(const TaskSpec& spec, const std::vector<Prediction>& raw, double duration) {
  TaskOutput out;
  std::vector<Prediction> refined = postprocess::refine(raw, spec.topk, spec.nms);
  if (spec.segment_task()) {
    if (static_cast<int>(refined.size()) > spec.topk) refined.resize(static_cast<std::size_t>(spec.topk));
    out.predictions = std::move(refined);
    return out;
  }
  std::vector<Prediction> top;
  if (!refined.empty()) {
    double best = 0.0;
    for (const auto& p : refined) best = std::max(best, p.score);
    for (const auto& p : refined) {
      if (p.score >= spec.gebd_score_ratio * best) top.push_back(p);
    }
  }
  out.boundaries = postprocess::extract_boundaries(top, duration, spec.gebd_min_sep_frac * duration);
  out.predictions = std::move(top);
  return out;
}

}  // namespace segloc
