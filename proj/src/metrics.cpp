// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "segloc/error.hpp"

namespace segloc::metrics {

double interpolated_ap(const std::vector<bool>& is_tp, int num_positives) {
  if (num_positives <= 0 || is_tp.empty()) return 0.0;
  const std::size_t n = is_tp.size();
  std::vector<double> prec(n), rec(n);
  int tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += is_tp[i] ? 1 : 0;
    prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(tp) / static_cast<double>(num_positives);
  }
  for (std::size_t i = n - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0, prev_rec = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rec[i] != prev_rec) {
      ap += (rec[i] - prev_rec) * prec[i];
      prev_rec = rec[i];
    }
  }
  return ap;
}

DetectionResult detection_map(const std::vector<std::vector<Prediction>>& preds,
                              const std::vector<std::vector<LabeledSegment>>& gts,
                              const std::vector<double>& thresholds, int num_classes) {
  if (preds.size() != gts.size()) throw InvalidInput("detection_map: prediction/ground-truth video count differs");
  if (num_classes <= 0) throw InvalidInput("detection_map: need at least one class");
  DetectionResult res;
  res.thresholds = thresholds;

  struct Ranked {
    std::size_t video;
    const Prediction* pred;
  };
  std::vector<std::vector<Ranked>> by_class(static_cast<std::size_t>(num_classes));
  std::vector<int> npos(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t v = 0; v < preds.size(); ++v) {
    for (const Prediction& p : preds[v]) {
      const int c = p.label.value_or(0);
      if (c < 0 || c >= num_classes) throw InvalidInput("detection_map: prediction label out of range");
      by_class[static_cast<std::size_t>(c)].push_back({v, &p});
      ++res.num_predictions;
    }
    for (const LabeledSegment& g : gts[v]) {
      if (g.label < 0 || g.label >= num_classes) throw InvalidInput("detection_map: ground-truth label out of range");
      ++npos[static_cast<std::size_t>(g.label)];
      ++res.num_ground_truths;
    }
  }
  for (auto& list : by_class) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Ranked& a, const Ranked& b) { return a.pred->score > b.pred->score; });
  }
  for (int c = 0; c < num_classes; ++c) {
    if (npos[static_cast<std::size_t>(c)] == 0) res.excluded_classes.push_back(c);
  }

  for (double thr : thresholds) {
    std::vector<std::optional<double>> aps(static_cast<std::size_t>(num_classes));
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < num_classes; ++c) {
      if (npos[static_cast<std::size_t>(c)] == 0) continue;
      std::vector<std::vector<bool>> used(gts.size());
      for (std::size_t v = 0; v < gts.size(); ++v) used[v].assign(gts[v].size(), false);
      std::vector<bool> is_tp;
      for (const Ranked& r : by_class[static_cast<std::size_t>(c)]) {
        int best = -1;
        double best_iou = thr;
        const auto& vg = gts[r.video];
        for (std::size_t j = 0; j < vg.size(); ++j) {
          if (vg[j].label != c || used[r.video][j]) continue;
          const double o = tiou(r.pred->segment, vg[j].segment);
          if (o >= best_iou && (best < 0 || o > best_iou)) {
            best = static_cast<int>(j);
            best_iou = o;
          }
        }
        if (best >= 0) used[r.video][static_cast<std::size_t>(best)] = true;
        is_tp.push_back(best >= 0);
      }
      const double ap = interpolated_ap(is_tp, npos[static_cast<std::size_t>(c)]);
      aps[static_cast<std::size_t>(c)] = ap;
      sum += ap;
      ++counted;
    }
    res.ap.push_back(std::move(aps));
    res.map.push_back(counted > 0 ? sum / counted : 0.0);
  }
  res.average_map =
      res.map.empty() ? 0.0 : std::accumulate(res.map.begin(), res.map.end(), 0.0) / static_cast<double>(res.map.size());
  return res;
}

DetectionResult average_map_sweep(const std::vector<std::vector<Prediction>>& preds,
                                  const std::vector<std::vector<LabeledSegment>>& gts, int num_classes) {
  return detection_map(preds, gts, kSweepThresholds, num_classes);
}

double recall_at_k(const std::vector<std::vector<Prediction>>& ranked, const std::vector<Segment>& gt, int k,
                   double tiou_threshold) {
  if (ranked.size() != gt.size()) throw InvalidInput("recall_at_k: query count mismatch");
  if (gt.empty()) return 0.0;
  int hits = 0;
  for (std::size_t q = 0; q < gt.size(); ++q) {
    const std::size_t n = std::min(ranked[q].size(), static_cast<std::size_t>(std::max(k, 0)));
    for (std::size_t i = 0; i < n; ++i) {
      if (tiou(ranked[q][i].segment, gt[q]) >= tiou_threshold) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(gt.size());
}

BoundaryCounts match_boundaries(const BoundarySet& pred, const BoundarySet& gt, double threshold, double norm_len) {
  const std::vector<double> p = pred.interior();
  const std::vector<double> g = gt.interior();
  BoundaryCounts c;
  c.predicted = static_cast<int>(p.size());
  c.ground_truth = static_cast<int>(g.size());
  std::vector<bool> used(g.size(), false);
  for (double t : p) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (used[j]) continue;
      if (relative_distance(t, g[j], norm_len) <= threshold) {
        used[j] = true;
        ++c.matched;
        break;
      }
    }
  }
  return c;
}

double f1_from_counts(const BoundaryCounts& c) {
  if (c.predicted == 0 && c.ground_truth == 0) return 1.0;
  if (c.matched == 0) return 0.0;
  const double precision = static_cast<double>(c.matched) / c.predicted;
  const double recall = static_cast<double>(c.matched) / c.ground_truth;
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

F1Result finish(const std::vector<double>& thresholds, const std::vector<BoundaryCounts>& counts) {
  F1Result r;
  r.thresholds = thresholds;
  for (const auto& c : counts) {
    r.f1.push_back(f1_from_counts(c));
    r.precision.push_back(c.predicted > 0 ? static_cast<double>(c.matched) / c.predicted : (c.ground_truth == 0));
    r.recall.push_back(c.ground_truth > 0 ? static_cast<double>(c.matched) / c.ground_truth : 1.0);
  }
  r.average = r.f1.empty() ? 0.0 : std::accumulate(r.f1.begin(), r.f1.end(), 0.0) / static_cast<double>(r.f1.size());
  return r;
}

}  // namespace

F1Result gebd_f1(const BoundarySet& pred, const BoundarySet& gt, const std::vector<double>& thresholds,
                 double norm_len) {
  return gebd_f1_dataset({pred}, {gt}, thresholds, {norm_len});
}

F1Result gebd_f1_dataset(const std::vector<BoundarySet>& preds, const std::vector<BoundarySet>& gts,
                         const std::vector<double>& thresholds, const std::vector<double>& norm_lens) {
  if (preds.size() != gts.size() || preds.size() != norm_lens.size()) {
    throw InvalidInput("gebd_f1: video count mismatch");
  }
  std::vector<BoundaryCounts> counts(thresholds.size());
  for (std::size_t v = 0; v < preds.size(); ++v) {
    if (!preds[v].valid() || !gts[v].valid()) throw InvalidInput("gebd_f1: invalid boundary set");
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      const BoundaryCounts c = match_boundaries(preds[v], gts[v], thresholds[t], norm_lens[v]);
      counts[t].matched += c.matched;
      counts[t].predicted += c.predicted;
      counts[t].ground_truth += c.ground_truth;
    }
  }
  return finish(thresholds, counts);
}

}  // namespace segloc::metrics
