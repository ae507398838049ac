// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

namespace segloc {

/// A time interval in seconds, 0 <= start <= end. Zero-length segments
/// stand for point events.
struct Segment {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  double center() const { return 0.5 * (start + end); }
  bool valid() const;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// A scored segment, optionally carrying a class index.
struct Prediction {
  Segment segment;
  double score = 0.0;
  std::optional<int> label;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Strictly increasing event boundaries with the first at 0 and the last at
/// the video duration.
struct BoundarySet {
  std::vector<double> boundaries;
  double duration = 0.0;

  bool valid() const;
  /// Boundaries other than 0 and duration.
  std::vector<double> interior() const;

  friend bool operator==(const BoundarySet&, const BoundarySet&) = default;
};

/// Temporal IoU. Two identical zero-length segments score 1, any other pair
/// with an empty union scores 0.
double tiou(const Segment& a, const Segment& b);

/// s_i = b_{i-1}, e_i = b_i. Throws InvalidInput with fewer than 2 boundaries
/// or an invalid set.
std::vector<Segment> boundaries_to_segments(const BoundarySet& bs);

/// Sorted, deduplicated endpoint union with 0 and duration added. Inputs are
/// clipped to [0, duration] first.
BoundarySet segments_to_boundaries(const std::vector<Segment>& segs, double duration);

/// |pred_t - gt_t| / norm_len; throws InvalidInput if norm_len <= 0.
double relative_distance(double pred_t, double gt_t, double norm_len);

Segment clip_segment(const Segment& s, double duration);

}  // namespace segloc
