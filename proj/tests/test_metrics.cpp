// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "metric_oracles.hpp"
#include "segloc/metrics.hpp"

namespace segloc::metrics {
namespace {

Prediction P(double s, double e, double score, int label = 0) { return Prediction{{s, e}, score, label}; }

TEST(InterpolatedAp, HandExamples) {
  EXPECT_DOUBLE_EQ(interpolated_ap({true, false, true}, 2), 0.5 + 0.5 * (2.0 / 3.0));
  EXPECT_DOUBLE_EQ(interpolated_ap({false, true}, 1), 0.5);
  EXPECT_DOUBLE_EQ(interpolated_ap({true}, 2), 0.5);
  EXPECT_DOUBLE_EQ(interpolated_ap({}, 3), 0.0);
  // The envelope lifts an early low precision to a later higher one.
  EXPECT_DOUBLE_EQ(interpolated_ap({false, true, true}, 2), 2.0 / 3.0);
}

TEST(DetectionMap, PerfectAndEmpty) {
  const std::vector<std::vector<LabeledSegment>> gts{{{{0, 2}, 0}, {{5, 6}, 1}}, {{{1, 3}, 1}}};
  const std::vector<std::vector<Prediction>> perfect{{P(0, 2, 0.9, 0), P(5, 6, 0.8, 1)}, {P(1, 3, 0.7, 1)}};
  const auto r = detection_map(perfect, gts, kThumosThresholds, 2);
  for (double m : r.map) EXPECT_DOUBLE_EQ(m, 1.0);
  EXPECT_DOUBLE_EQ(r.average_map, 1.0);
  EXPECT_EQ(r.num_ground_truths, 3);
  const auto none = detection_map({{}, {}}, gts, kThumosThresholds, 2);
  EXPECT_DOUBLE_EQ(none.average_map, 0.0);
}

TEST(DetectionMap, DuplicatesCountAsFalsePositives) {
  const std::vector<std::vector<LabeledSegment>> gts{{{{0, 2}, 0}}};
  const auto r = detection_map({{P(0, 2, 0.9), P(0, 2, 0.8)}}, gts, {0.5}, 1);
  EXPECT_DOUBLE_EQ(r.map[0], 1.0);
  const auto r2 = detection_map({{P(5, 6, 0.95), P(0, 2, 0.8)}}, gts, {0.5}, 1);
  EXPECT_DOUBLE_EQ(r2.map[0], 0.5);
}

TEST(DetectionMap, ClassesWithoutGroundTruthExcluded) {
  const std::vector<std::vector<LabeledSegment>> gts{{{{0, 2}, 0}}};
  const auto r = detection_map({{P(0, 2, 0.9, 0), P(4, 5, 0.9, 2)}}, gts, {0.5}, 3);
  EXPECT_DOUBLE_EQ(r.map[0], 1.0);
  EXPECT_EQ(r.excluded_classes, (std::vector<int>{1, 2}));
  EXPECT_FALSE(r.ap[0][1].has_value());
}

TEST(RecallAtK, CountsHitsInTopK) {
  const std::vector<std::vector<Prediction>> ranked{{P(5, 6, 0.9), P(0, 2, 0.5)}, {P(0, 1, 0.9)}};
  const std::vector<Segment> gt{{0, 2}, {3, 4}};
  EXPECT_DOUBLE_EQ(recall_at_k(ranked, gt, 1, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(recall_at_k(ranked, gt, 2, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(recall_at_k(ranked, gt, 5, 0.5), 0.5);
}

TEST(GebdF1, MatchesWithinThreshold) {
  const BoundarySet gt{{0, 3, 6, 10}, 10};
  const BoundarySet pred{{0, 3.4, 8, 10}, 10};
  const auto c = match_boundaries(pred, gt, 0.05, 10.0);
  EXPECT_EQ(c.matched, 1);
  EXPECT_EQ(c.predicted, 2);
  EXPECT_EQ(c.ground_truth, 2);
  EXPECT_DOUBLE_EQ(f1_from_counts(c), 0.5);
  const auto f = gebd_f1(pred, gt, {0.01, 0.05, 0.2}, 10.0);
  EXPECT_DOUBLE_EQ(f.f1[0], 0.0);
  EXPECT_DOUBLE_EQ(f.f1[2], 1.0);
  EXPECT_DOUBLE_EQ(f.average, (0.0 + 0.5 + 1.0) / 3.0);
}

TEST(GebdF1, EachGroundTruthMatchedOnce) {
  const BoundarySet gt{{0, 5, 10}, 10};
  const auto c = match_boundaries({{0, 4.9, 5.1, 10}, 10}, gt, 0.05, 10.0);
  EXPECT_EQ(c.matched, 1);
  EXPECT_EQ(c.predicted, 2);
}

TEST(GebdF1, DatasetPoolsCounts) {
  const auto r = gebd_f1_dataset({{{0, 5, 10}, 10}, {{0, 10}, 10}}, {{{0, 5, 10}, 10}, {{0, 2, 10}, 10}}, {0.1},
                                 {10.0, 10.0});
  // matched 1, predicted 1, ground truth 2
  EXPECT_DOUBLE_EQ(r.precision[0], 1.0);
  EXPECT_DOUBLE_EQ(r.recall[0], 0.5);
  EXPECT_DOUBLE_EQ(r.f1[0], 2.0 / 3.0);
}

TEST(Oracles, RandomInstancesAgree) {
  Rng rng(2024);
  for (int i = 0; i < 300; ++i) ASSERT_LE(testing::metric_instance_error(rng), 1e-12) << "instance " << i;
}

}  // namespace
}  // namespace segloc::metrics
