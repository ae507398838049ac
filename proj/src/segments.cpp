// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/segments.hpp"

#include <algorithm>
#include <cmath>

#include "segloc/error.hpp"

namespace segloc {

bool Segment::valid() const { return std::isfinite(start) && std::isfinite(end) && start >= 0.0 && start <= end; }

bool BoundarySet::valid() const {
  if (boundaries.size() < 2 || !std::isfinite(duration)) return false;
  if (boundaries.front() != 0.0 || boundaries.back() != duration) return false;
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (!(boundaries[i] > boundaries[i - 1])) return false;
  }
  return true;
}

std::vector<double> BoundarySet::interior() const {
  std::vector<double> out;
  for (double b : boundaries) {
    if (b > 0.0 && b < duration) out.push_back(b);
  }
  return out;
}

double tiou(const Segment& a, const Segment& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  if (uni <= 0.0) return (a.length() == 0.0 && b.length() == 0.0 && a.start == b.start) ? 1.0 : 0.0;
  return inter / uni;
}

std::vector<Segment> boundaries_to_segments(const BoundarySet& bs) {
  if (bs.boundaries.size() < 2) throw InvalidInput("boundary set needs at least 2 boundaries");
  if (!bs.valid()) throw InvalidInput("boundary set must start at 0, end at duration and strictly increase");
  std::vector<Segment> out;
  out.reserve(bs.boundaries.size() - 1);
  for (std::size_t i = 1; i < bs.boundaries.size(); ++i) out.push_back({bs.boundaries[i - 1], bs.boundaries[i]});
  return out;
}

BoundarySet segments_to_boundaries(const std::vector<Segment>& segs, double duration) {
  std::vector<double> pts{0.0, duration};
  for (const Segment& s : segs) {
    const Segment c = clip_segment(s, duration);
    pts.push_back(c.start);
    pts.push_back(c.end);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return BoundarySet{std::move(pts), duration};
}

double relative_distance(double pred_t, double gt_t, double norm_len) {
  if (!(norm_len > 0.0)) throw InvalidInput("relative distance needs a positive normalization length");
  return std::abs(pred_t - gt_t) / norm_len;
}

Segment clip_segment(const Segment& s, double duration) {
  Segment c{std::clamp(s.start, 0.0, duration), std::clamp(s.end, 0.0, duration)};
  if (c.end < c.start) c.end = c.start;
  return c;
}

}  // namespace segloc
