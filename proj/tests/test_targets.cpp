// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "model_fixtures.hpp"
#include "segloc/error.hpp"
#include "segloc/segments.hpp"
#include "segloc/targets.hpp"
#include "test_util.hpp"

namespace segloc {
namespace {

using ag::Graph;
using ag::Var;

TEST(AnchorGrid, GeometryAndBuckets) {
  const AnchorGrid g = build_anchor_grid({4, 2, 1}, 8.0, 16);
  EXPECT_EQ(g.total(), 7);
  EXPECT_EQ(g.offset(2), 6);
  EXPECT_DOUBLE_EQ(g.strides[0], 2.0);
  EXPECT_EQ(g.times[0], (std::vector<double>{1, 3, 5, 7}));
  const AnchorGrid five = build_anchor_grid({16, 8, 4, 2, 1}, 8.0, 16, 4.0);
  EXPECT_EQ(five.range_lo, (std::vector<double>{0, 4, 8, 16, 32}));
  EXPECT_EQ(five.range_hi[3], 32.0);
  EXPECT_TRUE(std::isinf(five.range_hi[4]));
}

AnchorGrid unit_grid(int n) {
  AnchorGrid g;
  g.lengths = {n};
  g.strides = {1.0};
  g.times.push_back({});
  for (int i = 0; i < n; ++i) g.times[0].push_back(i);
  g.range_lo = {0};
  g.range_hi = {std::numeric_limits<double>::infinity()};
  return g;
}

TEST(Assign, OffsetsAndNegatives) {
  AssignConfig cfg;
  cfg.center_radius = 3.0;
  const auto t = assign_targets({{{3, 8}, std::nullopt}}, unit_grid(12), {}, cfg);
  EXPECT_TRUE(t.positive[5]);
  EXPECT_DOUBLE_EQ(t.offsets[10], 2.0);
  EXPECT_DOUBLE_EQ(t.offsets[11], 3.0);
  EXPECT_FALSE(t.positive[10]);
  EXPECT_FALSE(t.positive[1]);
  EXPECT_EQ(t.unassigned, 0);
}

TEST(Assign, ShortestWinsAgainstExhaustiveOracle) {
  Rng rng(4);
  const AnchorGrid grid = build_anchor_grid({16, 8, 4}, 4.0, 4, 2.0);
  for (int it = 0; it < 300; ++it) {
    std::vector<Annotation> anns;
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 3));
    for (int k = 0; k < n; ++k) {
      const double a = rng.uniform(0, 14), l = rng.uniform(0.5, 8);
      anns.push_back({{a, std::min(16.0, a + l)}, k});
    }
    const auto t = assign_targets(anns, grid, {}, {});
    int row = 0;
    for (int l = 0; l < grid.levels(); ++l)
      for (int i = 0; i < grid.lengths[l]; ++i, ++row) {
        // Oracle: enumerate eligible annotations, pick the shortest (first on ties).
        const double a = grid.times[l][i], s = grid.strides[l];
        int best = -1;
        for (int k = 0; k < n; ++k) {
          const Segment& g = anns[k].segment;
          const bool inside = a >= std::max(g.start, g.center() - 1.5 * s) && a <= std::min(g.end, g.center() + 1.5 * s);
          const double reach = std::max(a - g.start, g.end - a);
          if (inside && reach >= grid.range_lo[l] && reach < grid.range_hi[l] &&
              (best < 0 || g.length() < anns[best].segment.length()))
            best = k;
        }
        ASSERT_EQ(t.segment[row], best);
        ASSERT_EQ(t.label[row], best < 0 ? -1 : best);
      }
  }
}

TEST(Assign, DecodeRoundTrip) {
  Rng rng(6);
  const AnchorGrid grid = build_anchor_grid({16, 8, 4}, 4.0, 4, 2.0);
  for (int it = 0; it < 50; ++it) {
    const double a = rng.uniform(0, 10), l = rng.uniform(0.5, 6);
    const std::vector<Annotation> anns{{{a, a + l}, std::nullopt}};
    const auto t = assign_targets(anns, grid, {}, {});
    DenseValues<double> d;
    d.level_lengths = grid.lengths;
    d.mask.assign(grid.total(), 1);
    d.offsets = Tensor<double>({grid.total(), 2}, t.offsets);
    std::vector<double> logit(grid.total());
    for (int r = 0; r < grid.total(); ++r) logit[r] = t.positive[r] ? 10.0 : -30.0;
    d.logits = Tensor<double>({grid.total(), 1}, logit);
    for (const Prediction& p : decode_predictions(d, grid, 0.5, 100, 100.0)) {
      EXPECT_NEAR(p.segment.start, anns[0].segment.start, 1e-9);
      EXPECT_NEAR(p.segment.end, anns[0].segment.end, 1e-9);
    }
  }
}

TEST(Assign, SaliencyLabelsAndMask) {
  const AnchorGrid grid = unit_grid(6);
  const auto t = assign_targets({{{1.5, 3.5}, std::nullopt}}, grid, {1, 1, 1, 1, 1, 0}, {}, true);
  EXPECT_EQ(t.saliency, (std::vector<std::int8_t>{0, 0, 1, 1, 0, -1}));
  EXPECT_THROW(assign_targets({}, grid, {1, 1}, {}), InvalidInput);
}

// Dense outputs over given logits/offsets as graph leaves.
struct Head {
  Tensor<double> offsets, logits;
  DenseOutputs bind(Graph<double>& g, int m, bool sal) const {
    DenseOutputs d;
    d.offsets = g.input(offsets);
    d.logits = g.input(logits);
    d.level_lengths = {offsets.rows()};
    d.mask.assign(offsets.rows(), 1);
    d.num_classes = m;
    d.saliency = sal;
    return d;
  }
};

TEST(Losses, LimitCases) {
  Graph<double> g;
  TrainingTargets t;
  t.valid.assign(3, 1);
  t.positive.assign(3, 0);
  t.segment.assign(3, -1);
  t.label.assign(3, -1);
  t.offsets.assign(6, 0);
  Head h{Tensor<double>({3, 2}, 1.0), Tensor<double>({3, 1}, -1e3)};
  DenseOutputs d = h.bind(g, 0, false);
  EXPECT_NEAR(g.value(classification_loss(g, d, t))[0], 0.0, 1e-12);
  EXPECT_EQ(g.value(regression_loss(g, d, t))[0], 0.0);
  t.positive = {1, 0, 0};
  t.num_positive = 1;
  t.offsets = {1, 1, 0, 0, 0, 0};
  h.logits = Tensor<double>({3, 1}, std::vector<double>{40, -40, -40});
  d = h.bind(g, 0, false);
  EXPECT_NEAR(g.value(classification_loss(g, d, t))[0], 0.0, 1e-12);
  EXPECT_NEAR(g.value(regression_loss(g, d, t))[0], 0.0, 1e-15);
  h.offsets = Tensor<double>({3, 2}, std::vector<double>{0.5, 0.5, 0, 0, 0, 0});  // half overlap
  d = h.bind(g, 0, false);
  EXPECT_NEAR(g.value(regression_loss(g, d, t))[0], 1.0 - tiou({-0.5, 0.5}, {-1, 1}), 1e-15);
}

double focal_oracle(double x, double y, double alpha, double gamma) {
  const double p = 1 / (1 + std::exp(-x));
  const double pt = y > 0 ? p : 1 - p, at = y > 0 ? alpha : 1 - alpha;
  return -at * std::pow(1 - pt, gamma) * std::log(pt);
}

TEST(Losses, MatchScalarOracles) {
  Rng rng(9);
  for (int it = 0; it < 50; ++it) {
    const int n = 6, m = 2;
    Head h{testing::random_tensor({n, 2}, rng, 2.0), testing::random_tensor({n, 1 + m + 1}, rng, 3.0)};
    for (std::size_t i = 0; i < h.offsets.size(); ++i) h.offsets[i] = std::abs(h.offsets[i]) + 0.1;
    TrainingTargets t;
    t.valid = {1, 1, 1, 1, 1, 0};
    for (int r = 0; r < n; ++r) {
      const bool pos = rng.uniform() < 0.5 && t.valid[r];
      t.positive.push_back(pos);
      t.label.push_back(pos ? static_cast<int>(rng.uniform_int(0, m - 1)) : -1);
      t.segment.push_back(pos ? 0 : -1);
      t.offsets.push_back(pos ? rng.uniform(0.1, 3) : 0);
      t.offsets.push_back(pos ? rng.uniform(0.1, 3) : 0);
      t.num_positive += pos;
      t.saliency.push_back(static_cast<std::int8_t>(rng.uniform_int(-1, 1)));
    }
    Graph<double> g;
    const DenseOutputs d = h.bind(g, m, true);
    const LossConfig cfg;
    double cls = 0, reg = 0, sal = 0;
    int pairs = 0;
    for (int r = 0; r < n; ++r) {
      if (!t.valid[r]) continue;
      cls += focal_oracle(h.logits.at(r, 0), t.positive[r], cfg.alpha, cfg.gamma);
      if (t.positive[r]) {
        for (int c = 0; c < m; ++c) cls += focal_oracle(h.logits.at(r, 1 + c), t.label[r] == c, cfg.alpha, cfg.gamma);
        reg += 1 - tiou({-h.offsets.at(r, 0), h.offsets.at(r, 1)}, {-t.offsets[2 * r], t.offsets[2 * r + 1]});
      }
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (t.saliency[i] == 1 && t.saliency[j] == 0) {
          sal += std::max(0.0, cfg.margin - (h.logits.at(i, 3) - h.logits.at(j, 3)));
          ++pairs;
        }
    const double norm = std::max(1, t.num_positive);
    EXPECT_NEAR(g.value(classification_loss(g, d, t, cfg))[0], cls / norm, 1e-12);
    EXPECT_NEAR(g.value(regression_loss(g, d, t))[0], reg / norm, 1e-12);
    EXPECT_NEAR(g.value(saliency_loss(g, d, t, cfg))[0], pairs ? sal / pairs : 0.0, 1e-12);
    const LossParts lp = total_loss(g, d, t, cfg);
    EXPECT_NEAR(lp.value, lp.cls + cfg.lambda_reg * lp.reg + cfg.lambda_sal * lp.sal, 1e-12);
  }
}

TEST(Losses, SaliencyEqualScores) {
  Graph<double> g;
  TrainingTargets t;
  t.valid.assign(4, 1);
  t.positive.assign(4, 0);
  t.offsets.assign(8, 0);
  t.saliency = {1, 0, 1, 0};
  Head h{Tensor<double>({4, 2}, 1.0), Tensor<double>({4, 2}, 0.3)};
  EXPECT_NEAR(g.value(saliency_loss(g, h.bind(g, 0, true), t))[0], LossConfig{}.margin, 1e-15);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  TrainingTargets t;
  const int n = 5, m = 2;
  t.valid = {1, 1, 1, 1, 0};
  t.positive = {1, 0, 1, 0, 0};
  t.label = {0, -1, 1, -1, -1};
  t.offsets = {1.2, 0.7, 0, 0, 2.0, 0.4, 0, 0, 0, 0};
  t.num_positive = 2;
  t.saliency = {1, 0, 1, 0, -1};
  const auto off = testing::random_tensor({n, 2}, rng, 1.0);
  Tensor<double> offp = off;
  for (std::size_t i = 0; i < offp.size(); ++i) offp[i] = std::abs(off[i]) + 0.2;
  auto logits = testing::random_tensor({n, 1 + m + 1}, rng, 2.0);
  for (int r = 0; r < n; ++r) logits.at(r, 3) *= 0.05;  // keep saliency pairs inside the margin
  auto loss = [&](int which) {
    return [&, which](Graph<double>& g, const std::vector<Var>& v) {
      DenseOutputs d;
      d.offsets = v[0];
      d.logits = v[1];
      d.level_lengths = {n};
      d.mask.assign(n, 1);
      d.num_classes = m;
      d.saliency = true;
      if (which == 0) return classification_loss(g, d, t);
      if (which == 1) return regression_loss(g, d, t);
      if (which == 2) return saliency_loss(g, d, t);
      return total_loss(g, d, t).total;
    };
  };
  for (int w = 0; w < 4; ++w) EXPECT_LT(testing::grad_check({offp, logits}, loss(w)), 1e-6) << w;
}

TEST(Decode, ScalingLogitsKeepsTop1) {
  Rng rng(12);
  const AnchorGrid grid = build_anchor_grid({8, 4}, 4.0, 4, 2.0);
  for (int it = 0; it < 100; ++it) {
    DenseValues<double> d;
    d.level_lengths = grid.lengths;
    d.mask.assign(grid.total(), 1);
    d.offsets = testing::random_tensor({grid.total(), 2}, rng, 1.0);
    for (std::size_t i = 0; i < d.offsets.size(); ++i) d.offsets[i] = std::abs(d.offsets[i]);
    d.logits = testing::random_tensor({grid.total(), 1}, rng, 4.0);
    const auto a = decode_predictions(d, grid, 0.0, 1, 100.0);
    for (std::size_t i = 0; i < d.logits.size(); ++i) d.logits[i] *= 2.5;
    const auto b = decode_predictions(d, grid, 0.0, 1, 100.0);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].segment, b[0].segment);
  }
}

}  // namespace
}  // namespace segloc
