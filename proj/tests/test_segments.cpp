// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "segloc/error.hpp"
#include "segloc/rng.hpp"
#include "segloc/segments.hpp"

namespace segloc {
namespace {

TEST(Tiou, Examples) {
  EXPECT_DOUBLE_EQ(tiou({0, 2}, {1, 3}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(tiou({0, 1}, {0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(tiou({0, 1}, {2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(tiou({1, 1}, {1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(tiou({1, 1}, {0, 2}), 0.0);
  EXPECT_DOUBLE_EQ(tiou({0, 4}, {1, 2}), 0.25);
}

TEST(Tiou, SymmetricAndBounded) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.uniform(0, 10), b = rng.uniform(0, 10), c = rng.uniform(0, 10), d = rng.uniform(0, 10);
    const Segment s{std::min(a, b), std::max(a, b)}, t{std::min(c, d), std::max(c, d)};
    EXPECT_EQ(tiou(s, t), tiou(t, s));
    EXPECT_GE(tiou(s, t), 0.0);
    EXPECT_LE(tiou(s, t), 1.0);
  }
}

TEST(Boundaries, ConvertBothWays) {
  const BoundarySet bs{{0.0, 2.5, 4.0, 10.0}, 10.0};
  const auto segs = boundaries_to_segments(bs);
  ASSERT_EQ(segs.size(), 3u);
  EXPECT_EQ(segs[1], (Segment{2.5, 4.0}));
  EXPECT_EQ(segments_to_boundaries(segs, 10.0), bs);
  EXPECT_EQ(bs.interior(), (std::vector<double>{2.5, 4.0}));
}

TEST(Boundaries, UnionDedupsAndClips) {
  const auto bs = segments_to_boundaries({{1, 3}, {3, 12}, {-1, 1}}, 10.0);
  EXPECT_EQ(bs.boundaries, (std::vector<double>{0.0, 1.0, 3.0, 10.0}));
  EXPECT_TRUE(bs.valid());
}

TEST(Boundaries, RejectsInvalid) {
  EXPECT_THROW(boundaries_to_segments({{0.0}, 1.0}), InvalidInput);
  EXPECT_THROW(boundaries_to_segments({{0.0, 2.0, 1.0, 3.0}, 3.0}), InvalidInput);
  EXPECT_THROW(boundaries_to_segments({{0.5, 3.0}, 3.0}), InvalidInput);
  EXPECT_THROW(relative_distance(1.0, 2.0, 0.0), InvalidInput);
  EXPECT_DOUBLE_EQ(relative_distance(1.0, 2.0, 4.0), 0.25);
}

TEST(Segment, ClipAndValidity) {
  EXPECT_EQ(clip_segment({-1.0, 4.0}, 3.0), (Segment{0.0, 3.0}));
  EXPECT_TRUE((Segment{1.0, 1.0}).valid());
  EXPECT_FALSE((Segment{2.0, 1.0}).valid());
  EXPECT_FALSE((Segment{-1.0, 1.0}).valid());
}

}  // namespace
}  // namespace segloc
