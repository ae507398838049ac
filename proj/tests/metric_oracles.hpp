// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations of the evaluation metrics, written
// independently of src/metrics.cpp, plus a random instance generator.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "segloc/metrics.hpp"
#include "segloc/rng.hpp"

namespace segloc::testing {

inline double oracle_tiou(const Segment& a, const Segment& b) {
  if (a == b) return 1.0;
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

struct OracleMap {
  std::vector<std::vector<std::optional<double>>> ap;  // [threshold][class]
  std::vector<double> map;
  double average = 0.0;
};

inline OracleMap oracle_detection_map(const std::vector<std::vector<Prediction>>& preds,
                                      const std::vector<std::vector<metrics::LabeledSegment>>& gts,
                                      const std::vector<double>& thresholds, int num_classes) {
  OracleMap out;
  for (double thr : thresholds) {
    std::vector<std::optional<double>> aps(static_cast<std::size_t>(num_classes));
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < num_classes; ++c) {
      int npos = 0;
      for (const auto& v : gts)
        for (const auto& g : v) npos += g.label == c;
      if (npos == 0) continue;
      // Rank by repeated selection of the best remaining prediction.
      std::vector<std::pair<std::size_t, std::size_t>> pool;
      for (std::size_t v = 0; v < preds.size(); ++v)
        for (std::size_t i = 0; i < preds[v].size(); ++i)
          if (preds[v][i].label.value_or(0) == c) pool.push_back({v, i});
      std::vector<std::vector<bool>> used(gts.size());
      for (std::size_t v = 0; v < gts.size(); ++v) used[v].assign(gts[v].size(), false);
      std::vector<bool> tp;
      while (!pool.empty()) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < pool.size(); ++k)
          if (preds[pool[k].first][pool[k].second].score > preds[pool[best].first][pool[best].second].score) best = k;
        const auto [v, i] = pool[best];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
        double top = -1.0;
        int which = -1;
        for (std::size_t j = 0; j < gts[v].size(); ++j) {
          if (used[v][j] || gts[v][j].label != c) continue;
          const double o = oracle_tiou(preds[v][i].segment, gts[v][j].segment);
          if (o > top) {
            top = o;
            which = static_cast<int>(j);
          }
        }
        const bool hit = which >= 0 && top >= thr;
        if (hit) used[v][static_cast<std::size_t>(which)] = true;
        tp.push_back(hit);
      }
      double ap = 0.0;
      int hits = 0;
      for (std::size_t k = 0; k < tp.size(); ++k) {
        if (!tp[k]) continue;
        double env = 0.0;
        int h = 0;
        for (std::size_t j = 0; j < tp.size(); ++j) {
          h += tp[j];
          if (j >= k) env = std::max(env, static_cast<double>(h) / static_cast<double>(j + 1));
        }
        ap += env;
        ++hits;
      }
      aps[static_cast<std::size_t>(c)] = ap / npos;
      sum += ap / npos;
      ++counted;
    }
    out.ap.push_back(aps);
    out.map.push_back(counted ? sum / counted : 0.0);
  }
  for (double m : out.map) out.average += m / static_cast<double>(out.map.size());
  return out;
}

inline double oracle_recall_at_k(const std::vector<std::vector<Prediction>>& ranked, const std::vector<Segment>& gt,
                                 int k, double thr) {
  if (gt.empty()) return 0.0;
  int hits = 0;
  for (std::size_t q = 0; q < gt.size(); ++q) {
    bool hit = false;
    for (std::size_t i = 0; i < ranked[q].size() && static_cast<int>(i) < k; ++i)
      hit = hit || oracle_tiou(ranked[q][i].segment, gt[q]) >= thr;
    hits += hit;
  }
  return static_cast<double>(hits) / static_cast<double>(gt.size());
}

/// Maximum one-to-one matching of interior boundaries by exhaustive search.
inline int oracle_max_matching(const std::vector<double>& p, const std::vector<double>& g, double thr, double norm) {
  std::vector<bool> used(g.size(), false);
  std::function<int(std::size_t)> go = [&](std::size_t i) -> int {
    if (i == p.size()) return 0;
    int best = go(i + 1);
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (used[j] || std::abs(p[i] - g[j]) / norm > thr) continue;
      used[j] = true;
      best = std::max(best, 1 + go(i + 1));
      used[j] = false;
    }
    return best;
  };
  return go(0);
}

inline double oracle_f1(int matched, int predicted, int truth) {
  if (predicted == 0 && truth == 0) return 1.0;
  if (matched == 0) return 0.0;
  const double p = static_cast<double>(matched) / predicted, r = static_cast<double>(matched) / truth;
  return 2 * p * r / (p + r);
}

inline std::vector<double> interior_of(const BoundarySet& b) {
  return {b.boundaries.begin() + 1, b.boundaries.end() - 1};
}

// ---------------------------------------------------------------- instances

inline Segment random_segment(Rng& rng, double duration) {
  const double a = rng.uniform(0, duration), b = rng.uniform(0, duration);
  return {std::min(a, b), std::max(a, b)};
}

/// Boundaries on a coarse grid so that exact ties and near misses occur.
inline BoundarySet random_boundaries(Rng& rng, int max_interior, double duration) {
  const int n = static_cast<int>(rng.uniform_int(0, max_interior));
  std::vector<double> pts;
  for (int i = 0; i < n; ++i) pts.push_back(std::round(rng.uniform(0.5, duration - 0.5) * 4) / 4);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  BoundarySet b{{0.0}, duration};
  b.boundaries.insert(b.boundaries.end(), pts.begin(), pts.end());
  b.boundaries.push_back(duration);
  return b;
}

/// Worst absolute deviation of detection_map, recall_at_k and gebd_f1 from
/// the oracles on one random instance (at most 8 predictions and 4 ground
/// truths per metric).
inline double metric_instance_error(Rng& rng) {
  double worst = 0.0;
  const double dur = 20.0;
  // Detection: 1-2 videos, 1-3 classes.
  const int videos = static_cast<int>(rng.uniform_int(1, 2)), classes = static_cast<int>(rng.uniform_int(1, 3));
  std::vector<std::vector<Prediction>> preds(static_cast<std::size_t>(videos));
  std::vector<std::vector<metrics::LabeledSegment>> gts(static_cast<std::size_t>(videos));
  const int np = static_cast<int>(rng.uniform_int(0, 8)), ng = static_cast<int>(rng.uniform_int(0, 4));
  for (int i = 0; i < np; ++i) {
    const double score = rng.uniform() < 0.2 ? 0.5 : rng.uniform();  // some exact ties
    preds[rng.uniform_int(0, videos - 1)].push_back(
        {random_segment(rng, dur), score, static_cast<int>(rng.uniform_int(0, classes - 1))});
  }
  for (int i = 0; i < ng; ++i)
    gts[rng.uniform_int(0, videos - 1)].push_back({random_segment(rng, dur), static_cast<int>(rng.uniform_int(0, classes - 1))});
  // Some predictions copy a ground truth so that hits are common.
  for (auto& v : preds)
    for (auto& p : v)
      if (rng.uniform() < 0.3 && ng > 0)
        for (const auto& g : gts)
          if (!g.empty()) p.segment = g[rng.uniform_int(0, g.size() - 1)].segment;
  const std::vector<double> thr{0.1, 0.3, 0.5, 0.7, 0.9};
  const auto got = metrics::detection_map(preds, gts, thr, classes);
  const auto want = oracle_detection_map(preds, gts, thr, classes);
  for (std::size_t t = 0; t < thr.size(); ++t) {
    worst = std::max(worst, std::abs(got.map[t] - want.map[t]));
    for (int c = 0; c < classes; ++c) {
      const auto& a = got.ap[t][static_cast<std::size_t>(c)];
      const auto& b = want.ap[t][static_cast<std::size_t>(c)];
      if (a.has_value() != b.has_value()) return 1.0;
      if (a) worst = std::max(worst, std::abs(*a - *b));
    }
  }
  worst = std::max(worst, std::abs(got.average_map - want.average));

  // Recall@k: 1-4 queries with up to 8 ranked predictions each.
  const int nq = static_cast<int>(rng.uniform_int(1, 4));
  std::vector<std::vector<Prediction>> ranked(static_cast<std::size_t>(nq));
  std::vector<Segment> truth;
  for (int q = 0; q < nq; ++q) {
    truth.push_back(random_segment(rng, dur));
    const int n = static_cast<int>(rng.uniform_int(0, 8));
    for (int i = 0; i < n; ++i)
      ranked[static_cast<std::size_t>(q)].push_back({rng.uniform() < 0.25 ? truth.back() : random_segment(rng, dur), 1.0 - 0.1 * i, {}});
  }
  for (int k : {1, 5})
    for (double t : {0.3, 0.5, 0.7})
      worst = std::max(worst, std::abs(metrics::recall_at_k(ranked, truth, k, t) - oracle_recall_at_k(ranked, truth, k, t)));

  // GEBD F1.
  const BoundarySet pb = random_boundaries(rng, 8, dur), gb = random_boundaries(rng, 4, dur);
  const double norm = rng.uniform() < 0.5 ? dur : rng.uniform(2.0, 10.0);
  const auto f = metrics::gebd_f1(pb, gb, metrics::kRelDisThresholds, norm);
  const auto p = interior_of(pb), g = interior_of(gb);
  double avg = 0.0;
  for (std::size_t t = 0; t < f.thresholds.size(); ++t) {
    const double want_f1 = oracle_f1(oracle_max_matching(p, g, f.thresholds[t], norm), static_cast<int>(p.size()),
                                     static_cast<int>(g.size()));
    worst = std::max(worst, std::abs(f.f1[t] - want_f1));
    avg += want_f1 / static_cast<double>(f.thresholds.size());
  }
  return std::max(worst, std::abs(f.average - avg));
}

}  // namespace segloc::testing
