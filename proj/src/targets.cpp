// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "segloc/error.hpp"
#include "segloc/ops.hpp"

namespace segloc {

using ag::Var;

int AnchorGrid::total() const {
  int n = 0;
  for (int l : lengths) n += l;
  return n;
}

int AnchorGrid::offset(int level) const {
  int n = 0;
  for (int l = 0; l < level; ++l) n += lengths[static_cast<std::size_t>(l)];
  return n;
}

AnchorGrid build_anchor_grid(const std::vector<int>& lengths, double fps, int clip_len, double base_range) {
  if (!(fps > 0.0) || clip_len < 1 || !(base_range > 0.0)) throw InvalidInput("build_anchor_grid: bad geometry");
  AnchorGrid g;
  g.lengths = lengths;
  for (std::size_t l = 0; l < lengths.size(); ++l) {
    const double sigma = clip_len * std::ldexp(1.0, static_cast<int>(l)) / fps;
    g.strides.push_back(sigma);
    std::vector<double> t(static_cast<std::size_t>(lengths[l]));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (static_cast<double>(i) + 0.5) * sigma;
    g.times.push_back(std::move(t));
    g.range_lo.push_back(l == 0 ? 0.0 : base_range * std::ldexp(1.0, static_cast<int>(l) - 1));
    g.range_hi.push_back(l + 1 == lengths.size() ? std::numeric_limits<double>::infinity()
                                                  : base_range * std::ldexp(1.0, static_cast<int>(l)));
  }
  return g;
}

TrainingTargets assign_targets(const std::vector<Annotation>& annotations, const AnchorGrid& grid,
                               const std::vector<std::uint8_t>& anchor_mask, const AssignConfig& cfg,
                               bool with_saliency) {
  const int n = grid.total();
  if (!anchor_mask.empty() && static_cast<int>(anchor_mask.size()) != n)
    throw InvalidInput("assign_targets: mask does not match the grid");
  TrainingTargets t;
  t.valid = anchor_mask.empty() ? std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1) : anchor_mask;
  t.positive.assign(static_cast<std::size_t>(n), 0);
  t.segment.assign(static_cast<std::size_t>(n), -1);
  t.label.assign(static_cast<std::size_t>(n), -1);
  t.offsets.assign(2 * static_cast<std::size_t>(n), 0.0);
  std::vector<std::uint8_t> captured(annotations.size(), 0);

  int row = 0;
  for (int l = 0; l < grid.levels(); ++l) {
    const double sigma = grid.strides[static_cast<std::size_t>(l)];
    const double lo = grid.range_lo[static_cast<std::size_t>(l)], hi = grid.range_hi[static_cast<std::size_t>(l)];
    for (int i = 0; i < grid.lengths[static_cast<std::size_t>(l)]; ++i, ++row) {
      if (!t.valid[static_cast<std::size_t>(row)]) continue;
      const double a = grid.times[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
      int best = -1;
      for (std::size_t k = 0; k < annotations.size(); ++k) {
        const Segment& s = annotations[k].segment;
        const double c = s.center();
        const double left = std::max(s.start, c - cfg.center_radius * sigma);
        const double right = std::min(s.end, c + cfg.center_radius * sigma);
        if (a < left || a > right) continue;
        const double reach = std::max(a - s.start, s.end - a);
        if (reach < lo || reach >= hi) continue;
        if (best < 0 || s.length() < annotations[static_cast<std::size_t>(best)].segment.length()) best = static_cast<int>(k);
      }
      if (best < 0) continue;
      const Segment& s = annotations[static_cast<std::size_t>(best)].segment;
      t.positive[static_cast<std::size_t>(row)] = 1;
      t.segment[static_cast<std::size_t>(row)] = best;
      t.label[static_cast<std::size_t>(row)] = annotations[static_cast<std::size_t>(best)].label.value_or(-1);
      t.offsets[2 * static_cast<std::size_t>(row)] = (a - s.start) / sigma;
      t.offsets[2 * static_cast<std::size_t>(row) + 1] = (s.end - a) / sigma;
      captured[static_cast<std::size_t>(best)] = 1;
      ++t.num_positive;
    }
  }
  t.unassigned = static_cast<int>(std::count(captured.begin(), captured.end(), 0));

  if (with_saliency && grid.levels() > 0) {
    t.saliency.assign(static_cast<std::size_t>(grid.lengths[0]), -1);
    for (int i = 0; i < grid.lengths[0]; ++i) {
      if (!t.valid[static_cast<std::size_t>(i)]) continue;
      const double a = grid.times[0][static_cast<std::size_t>(i)];
      bool in = false;
      for (const Annotation& an : annotations) in = in || (a >= an.segment.start && a < an.segment.end);
      t.saliency[static_cast<std::size_t>(i)] = in ? 1 : 0;
    }
  }
  return t;
}

namespace {

template <class T>
T normalizer(const TrainingTargets& t) {
  return static_cast<T>(std::max(1, t.num_positive));
}

void check_rows(const DenseOutputs& d, const TrainingTargets& t) {
  if (d.mask.size() != t.valid.size()) throw InvalidInput("targets do not match the dense outputs");
}

}  // namespace

template <class T>
Var classification_loss(ag::Graph<T>& g, const DenseOutputs& d, const TrainingTargets& t, const LossConfig& cfg) {
  check_rows(d, t);
  const Tensor<T>& lv = g.value(d.logits);
  const int k = lv.cols();
  const std::size_t n = t.valid.size();
  std::vector<T> target(lv.size(), T(0)), weight(lv.size(), T(0));
  for (std::size_t r = 0; r < n; ++r) {
    const bool valid = t.valid[r] && d.mask[r];
    if (!valid) continue;
    weight[r * k] = T(1);
    target[r * k] = t.positive[r] ? T(1) : T(0);
    if (d.num_classes > 0 && t.positive[r]) {
      for (int c = 0; c < d.num_classes; ++c) {
        weight[r * k + 1 + c] = T(1);
        target[r * k + 1 + c] = t.label[r] == c ? T(1) : T(0);
      }
    }
  }
  return ag::focal_loss(g, d.logits, target, weight, static_cast<T>(cfg.alpha), static_cast<T>(cfg.gamma),
                        normalizer<T>(t));
}

template <class T>
Var regression_loss(ag::Graph<T>& g, const DenseOutputs& d, const TrainingTargets& t) {
  check_rows(d, t);
  std::vector<T> target(t.offsets.begin(), t.offsets.end());
  std::vector<std::uint8_t> pos(t.positive.size());
  for (std::size_t r = 0; r < pos.size(); ++r) pos[r] = t.positive[r] && t.valid[r] && d.mask[r];
  return ag::iou_loss(g, d.offsets, target, pos, normalizer<T>(t));
}

template <class T>
Var saliency_loss(ag::Graph<T>& g, const DenseOutputs& d, const TrainingTargets& t, const LossConfig& cfg) {
  check_rows(d, t);
  if (!d.saliency) throw ConfigError("saliency_loss: head has no saliency output");
  const int t0 = d.level_lengths.at(0);
  if (static_cast<int>(t.saliency.size()) != t0) throw InvalidInput("saliency_loss: targets missing");
  const int k = g.value(d.logits).cols();
  const Var col = ag::slice_cols(g, ag::slice_rows(g, d.logits, 0, t0), k - 1, k);
  return ag::margin_ranking_loss(g, col, t.saliency, static_cast<T>(cfg.margin));
}

template <class T>
LossParts total_loss(ag::Graph<T>& g, const DenseOutputs& d, const TrainingTargets& t, const LossConfig& cfg) {
  LossParts out;
  const Var cls = classification_loss(g, d, t, cfg);
  const Var reg = regression_loss(g, d, t);
  std::vector<Var> terms{cls, reg};
  std::vector<T> w{T(1), static_cast<T>(cfg.lambda_reg)};
  out.cls = static_cast<double>(g.value(cls)[0]);
  out.reg = static_cast<double>(g.value(reg)[0]);
  if (d.saliency) {
    const Var sal = saliency_loss(g, d, t, cfg);
    terms.push_back(sal);
    w.push_back(static_cast<T>(cfg.lambda_sal));
    out.sal = static_cast<double>(g.value(sal)[0]);
  }
  out.total = ag::weighted_sum(g, terms, w);
  out.value = static_cast<double>(g.value(out.total)[0]);
  return out;
}

#define SEGLOC_INSTANTIATE_TARGETS(T)                                                                             \
  template Var classification_loss<T>(ag::Graph<T>&, const DenseOutputs&, const TrainingTargets&,               \
                                      const LossConfig&);                                                         \
  template Var regression_loss<T>(ag::Graph<T>&, const DenseOutputs&, const TrainingTargets&);                    \
  template Var saliency_loss<T>(ag::Graph<T>&, const DenseOutputs&, const TrainingTargets&, const LossConfig&);   \
  template LossParts total_loss<T>(ag::Graph<T>&, const DenseOutputs&, const TrainingTargets&, const LossConfig&);

SEGLOC_INSTANTIATE_TARGETS(float)
SEGLOC_INSTANTIATE_TARGETS(double)

}  // namespace segloc
