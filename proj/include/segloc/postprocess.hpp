// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "segloc/segments.hpp"

namespace segloc::postprocess {

/// Deterministic total order: score descending, then earlier start, then
/// shorter length, then label, then end.
bool ranks_before(const Prediction& a, const Prediction& b);

/// Gaussian SoftNMS. Repeatedly takes the best remaining prediction and
/// decays every other remaining one (of the same class when
/// `class_aware`) by exp(-tiou^2 / sigma), dropping scores below
/// `score_floor`. Output sorted by final score, then earlier start.
std::vector<Prediction> soft_nms(const std::vector<Prediction>& preds, double sigma, double score_floor,
                                 bool class_aware);

/// The k best predictions under ranks_before().
std::vector<Prediction> topk(std::vector<Prediction> preds, int k);

/// Replaces each prediction's boundaries by the score-weighted mean of the
/// boundaries of all input predictions (same class when `class_aware`) with
/// tiou >= iou_threshold against it. Scores and order are unchanged.
std::vector<Prediction> segment_voting(const std::vector<Prediction>& preds, double iou_threshold,
                                       bool class_aware);

/// Candidate boundaries are the endpoints of `preds`, each scored by the
/// best prediction that contributes it. Greedy keep-highest-score subject
/// to pairwise separation >= min_sep; 0 and duration are always kept and
/// also enforce the separation.
BoundarySet extract_boundaries(const std::vector<Prediction>& preds, double duration, double min_sep);

enum class Stage { TopK, SoftNms, Voting };

struct Config {
  double sigma = 0.5;
  double score_floor = 1e-3;
  double voting_iou = 0.75;
  bool class_aware = false;
  std::vector<Stage> order{Stage::TopK, Stage::SoftNms, Stage::Voting};
};

/// Runs the configured stages in order.
std::vector<Prediction> refine(const std::vector<Prediction>& preds, int k, const Config& cfg);

std::string stage_name(Stage s);
Stage parse_stage(const std::string& s);

}  // namespace segloc::postprocess
