// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "segloc/error.hpp"

namespace segloc::postprocess {

bool ranks_before(const Prediction& a, const Prediction& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  if (a.segment.length() != b.segment.length()) return a.segment.length() < b.segment.length();
  const int la = a.label.value_or(-1), lb = b.label.value_or(-1);
  if (la != lb) return la < lb;
  return a.segment.end < b.segment.end;
}

std::vector<Prediction> soft_nms(const std::vector<Prediction>& preds, double sigma, double score_floor,
                                 bool class_aware) {
  if (!(sigma > 0.0)) throw InvalidInput("soft_nms: sigma must be positive");
  std::vector<Prediction> pool = preds;
  std::vector<Prediction> out;
  out.reserve(pool.size());
  while (!pool.empty()) {
    auto best = std::min_element(pool.begin(), pool.end(), ranks_before);
    Prediction keep = *best;
    pool.erase(best);
    std::vector<Prediction> next;
    next.reserve(pool.size());
    for (Prediction p : pool) {
      if (!class_aware || p.label == keep.label) {
        const double o = tiou(keep.segment, p.segment);
        p.score *= std::exp(-(o * o) / sigma);
      }
      if (p.score >= score_floor) next.push_back(p);
    }
    pool = std::move(next);
    out.push_back(keep);
  }
  std::stable_sort(out.begin(), out.end(), [](const Prediction& a, const Prediction& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.segment.start < b.segment.start;
  });
  return out;
}

std::vector<Prediction> topk(std::vector<Prediction> preds, int k) {
  if (k < 0) throw InvalidInput("topk: k must be non-negative");
  std::sort(preds.begin(), preds.end(), ranks_before);
  if (static_cast<std::size_t>(k) < preds.size()) preds.resize(static_cast<std::size_t>(k));
  return preds;
}

std::vector<Prediction> segment_voting(const std::vector<Prediction>& preds, double iou_threshold,
                                       bool class_aware) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw InvalidInput("segment_voting: threshold must be in (0, 1]");
  }
  std::vector<Prediction> out = preds;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double ws = 0.0, we = 0.0, wsum = 0.0;
    for (const Prediction& q : preds) {
      if (class_aware && q.label != preds[i].label) continue;
      if (tiou(preds[i].segment, q.segment) < iou_threshold) continue;
      ws += q.score * q.segment.start;
      we += q.score * q.segment.end;
      wsum += q.score;
    }
    if (wsum > 0.0) out[i].segment = Segment{ws / wsum, we / wsum};
  }
  return out;
}

BoundarySet extract_boundaries(const std::vector<Prediction>& preds, double duration, double min_sep) {
  if (!(min_sep >= 0.0)) throw InvalidInput("extract_boundaries: min_sep must be non-negative");
  std::map<double, double> cand;  // time -> best score
  for (const Prediction& p : preds) {
    const Segment s = clip_segment(p.segment, duration);
    for (double t : {s.start, s.end}) {
      if (t <= 0.0 || t >= duration) continue;
      auto [it, inserted] = cand.emplace(t, p.score);
      if (!inserted) it->second = std::max(it->second, p.score);
    }
  }
  std::vector<std::pair<double, double>> order(cand.begin(), cand.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<double> kept{0.0, duration};
  for (const auto& [t, score] : order) {
    bool ok = true;
    for (double k : kept) {
      if (std::abs(t - k) < min_sep) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(t);
  }
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  return BoundarySet{std::move(kept), duration};
}

std::vector<Prediction> refine(const std::vector<Prediction>& preds, int k, const Config& cfg) {
  std::vector<Prediction> cur = preds;
  for (Stage s : cfg.order) {
    switch (s) {
      case Stage::TopK:
        cur = topk(std::move(cur), k);
        break;
      case Stage::SoftNms:
        cur = soft_nms(cur, cfg.sigma, cfg.score_floor, cfg.class_aware);
        break;
      case Stage::Voting:
        cur = segment_voting(cur, cfg.voting_iou, cfg.class_aware);
        break;
    }
  }
  return cur;
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::TopK:
      return "topk";
    case Stage::SoftNms:
      return "softnms";
    case Stage::Voting:
      return "voting";
  }
  return "?";
}

Stage parse_stage(const std::string& s) {
  if (s == "topk") return Stage::TopK;
  if (s == "softnms") return Stage::SoftNms;
  if (s == "voting") return Stage::Voting;
  throw ConfigError("unknown post-processing stage: " + s);
}

}  // namespace segloc::postprocess
