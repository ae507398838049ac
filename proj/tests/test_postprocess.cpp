// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "segloc/error.hpp"
#include "segloc/postprocess.hpp"
#include "segloc/rng.hpp"
#include "segloc/tasks.hpp"

namespace segloc::postprocess {
namespace {

Prediction P(double s, double e, double score, std::optional<int> label = std::nullopt) {
  return Prediction{{s, e}, score, label};
}

TEST(Topk, OrdersByScoreThenStartThenLength) {
  const auto out = topk({P(2, 3, 0.5), P(1, 4, 0.5), P(1, 2, 0.5), P(0, 1, 0.9)}, 3);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], P(0, 1, 0.9));
  EXPECT_EQ(out[1], P(1, 2, 0.5));
  EXPECT_EQ(out[2], P(1, 4, 0.5));
}

TEST(SoftNms, DecaysOverlapsOnly) {
  const double sigma = 0.5;
  const auto out = soft_nms({P(0, 2, 0.9), P(0, 2, 0.8), P(5, 6, 0.7)}, sigma, 1e-3, false);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], P(0, 2, 0.9));
  EXPECT_EQ(out[1], P(5, 6, 0.7));
  EXPECT_DOUBLE_EQ(out[2].score, 0.8 * std::exp(-1.0 / sigma));
}

TEST(SoftNms, ClassAwareAndFloor) {
  const auto aware = soft_nms({P(0, 2, 0.9, 0), P(0, 2, 0.8, 1)}, 0.5, 1e-3, true);
  EXPECT_DOUBLE_EQ(aware[1].score, 0.8);
  const auto floor = soft_nms({P(0, 2, 0.9), P(0, 2, 0.01)}, 0.1, 1e-3, false);
  EXPECT_EQ(floor.size(), 1u);
}

TEST(SoftNms, NeverRaisesScoresAndKeepsTopOne) {
  Rng rng(8);
  for (int it = 0; it < 200; ++it) {
    std::vector<Prediction> in;
    for (int i = 0; i < 6; ++i) {
      const double a = rng.uniform(0, 10), l = rng.uniform(0.1, 4);
      in.push_back(P(a, a + l, rng.uniform(0.01, 1)));
    }
    const auto out = soft_nms(in, 0.5, 0.0, false);
    ASSERT_EQ(out.size(), in.size());
    EXPECT_EQ(out[0], topk(in, 1)[0]);
    double in_sum = 0, out_sum = 0;
    for (const auto& p : in) in_sum += p.score;
    for (const auto& p : out) out_sum += p.score;
    EXPECT_LE(out_sum, in_sum + 1e-12);
  }
}

TEST(Voting, AveragesOverlappingBoundaries) {
  const auto out = segment_voting({P(0, 4, 0.75), P(0, 5, 0.25), P(10, 11, 0.5)}, 0.75, false);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_DOUBLE_EQ(out[0].segment.end, 0.75 * 4 + 0.25 * 5);
  EXPECT_DOUBLE_EQ(out[0].score, 0.75);
  EXPECT_EQ(out[2], P(10, 11, 0.5));
}

TEST(ExtractBoundaries, KeepsSeparatedHighScoringEndpoints) {
  const auto bs = extract_boundaries({P(0, 4, 0.9), P(4.2, 10, 0.5), P(7, 9.8, 0.4)}, 10.0, 1.0);
  EXPECT_EQ(bs.boundaries, (std::vector<double>{0.0, 4.0, 7.0, 10.0}));
  EXPECT_TRUE(bs.valid());
}

TEST(Refine, StageNamesRoundTrip) {
  for (Stage s : {Stage::TopK, Stage::SoftNms, Stage::Voting}) EXPECT_EQ(parse_stage(stage_name(s)), s);
  EXPECT_THROW(parse_stage("bogus"), Error);
  Config c;
  c.order = {Stage::TopK};
  EXPECT_EQ(refine({P(0, 1, 0.1), P(0, 1, 0.2)}, 1, c).size(), 1u);
}

TEST(Tasks, SpecsAndFinalize) {
  EXPECT_EQ(parse_task("gebd"), TaskKind::GEBD);
  EXPECT_THROW(parse_task("x"), ConfigError);
  for (TaskKind k : {TaskKind::TAL, TaskKind::TVG, TaskKind::MR, TaskKind::GEBD})
    EXPECT_EQ(parse_task(task_name(k)), k);
  const TaskSpec tal = make_task_spec(TaskKind::TAL, 3);
  EXPECT_TRUE(tal.nms.class_aware);
  EXPECT_FALSE(tal.uses_text);
  EXPECT_TRUE(make_task_spec(TaskKind::MR).uses_saliency);
  EXPECT_TRUE(make_task_spec(TaskKind::TVG).uses_text);
  const TaskOutput g = finalize_predictions(make_task_spec(TaskKind::GEBD), {P(0, 5, 0.9), P(5, 10, 0.8)}, 10.0);
  ASSERT_TRUE(g.boundaries.has_value());
  EXPECT_EQ(g.boundaries->boundaries, (std::vector<double>{0.0, 5.0, 10.0}));
}

}  // namespace
}  // namespace segloc::postprocess
