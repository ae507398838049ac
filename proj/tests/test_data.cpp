// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "segloc/data.hpp"
#include "segloc/error.hpp"
#include "segloc/io.hpp"
#include "test_util.hpp"

namespace segloc {
namespace {

GenSpec small(TaskKind task, int videos = 6) {
  GenSpec g;
  g.task = task;
  g.videos = videos;
  g.height = g.width = 16;
  g.saliency = task == TaskKind::MR;
  return g;
}

TEST(Generator, PureFunctionOfSeed) {
  const auto a = generate_samples(small(TaskKind::TVG), 3);
  const auto b = generate_samples(small(TaskKind::TVG), 3);
  const auto c = generate_samples(small(TaskKind::TVG), 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].data, b[i].data);
    EXPECT_EQ(a[i].duration, b[i].duration);
  }
  EXPECT_NE(a[0].data, c[0].data);
}

TEST(Generator, TvgEventsAreDistinctAndQueried) {
  const GenSpec g = small(TaskKind::TVG, 20);
  for (const VideoSample& s : generate_samples(g, 1)) {
    s.validate();
    EXPECT_EQ(s.units, static_cast<int>(std::lround(s.duration * g.fps)));
    ASSERT_EQ(s.queries.size(), s.annotations.size());
    std::set<int> colors;
    for (std::size_t k = 0; k < s.queries.size(); ++k) {
      const auto& q = s.queries[k];
      ASSERT_EQ(q.tokens.size(), 4u);
      EXPECT_EQ(q.tokens[0], 1);
      colors.insert(q.tokens[1]);
      EXPECT_EQ(q.target, s.annotations[k].segment);
      EXPECT_GE(q.target.length(), g.min_event - 1e-9);
      EXPECT_LE(q.target.length(), g.max_event + 1e-9);
    }
    EXPECT_EQ(colors.size(), s.queries.size());
    for (std::size_t k = 1; k < s.annotations.size(); ++k)
      EXPECT_GE(s.annotations[k].segment.start - s.annotations[k - 1].segment.end, g.min_gap - 1e-9);
  }
}

TEST(Generator, TalLabelsAndGebdTiling) {
  for (const VideoSample& s : generate_samples(small(TaskKind::TAL, 10), 2))
    for (const auto& a : s.annotations) {
      ASSERT_TRUE(a.label.has_value());
      EXPECT_GE(*a.label, 0);
      EXPECT_LT(*a.label, 3);
    }
  for (const VideoSample& s : generate_samples(small(TaskKind::GEBD, 10), 2)) {
    ASSERT_GE(s.annotations.size(), 2u);
    EXPECT_EQ(s.annotations.front().segment.start, 0.0);
    EXPECT_DOUBLE_EQ(s.annotations.back().segment.end, s.duration);
    for (std::size_t k = 1; k < s.annotations.size(); ++k)
      EXPECT_EQ(s.annotations[k].segment.start, s.annotations[k - 1].segment.end);
  }
}

TEST(Generator, MrSaliencyInUnitRange) {
  for (const VideoSample& s : generate_samples(small(TaskKind::MR, 4), 5)) {
    ASSERT_FALSE(s.saliency.empty());
    EXPECT_DOUBLE_EQ(s.saliency_step, 2.0);
    for (double v : s.saliency) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(GenSpec, RejectsInfeasibleAndUnknown) {
  GenSpec g = small(TaskKind::TVG);
  g.max_events = 4;
  g.min_duration = 16.0;
  EXPECT_THROW(g.validate(), GenerationError);
  GenSpec h = small(TaskKind::TVG);
  h.colors = 2;
  h.max_events = 3;
  EXPECT_THROW(h.validate(), GenerationError);
  EXPECT_THROW(GenSpec::from_json({{"task", "tvg"}, {"bogus", 1}}), ConfigError);
  const GenSpec r = GenSpec::from_json(small(TaskKind::TAL).to_json());
  EXPECT_EQ(r.to_json(), small(TaskKind::TAL).to_json());
}

TEST(Storage, DatasetRoundTripAndByteIdentity) {
  const auto d1 = testing::temp_dir("data_a"), d2 = testing::temp_dir("data_b");
  const Manifest m = generate_dataset(small(TaskKind::TAL), 11, d1);
  generate_dataset(small(TaskKind::TAL), 11, d2);
  EXPECT_EQ(io::read_file(d1 / "manifest.json"), io::read_file(d2 / "manifest.json"));
  EXPECT_EQ(io::read_file(d1 / m.samples[0].tensor), io::read_file(d2 / m.samples[0].tensor));
  const Manifest back = load_manifest(d1 / "manifest.json");
  EXPECT_EQ(back, m);
  const auto mem = generate_samples(small(TaskKind::TAL), 11);
  const auto disk = load_samples(back);
  ASSERT_EQ(disk.size(), mem.size());
  EXPECT_EQ(disk[2].data, mem[2].data);
  EXPECT_EQ(disk[2].annotations.size(), mem[2].annotations.size());
}

TEST(Storage, LoadErrors) {
  const auto d = testing::temp_dir("data_err");
  EXPECT_THROW(load_manifest(d / "manifest.json"), LoadError);
  const Manifest m = generate_dataset(small(TaskKind::GEBD, 2), 1, d);

  nlohmann::json j = io::read_json(d / "manifest.json");
  j["version"] = "999";
  io::write_json(d / "v.json", j);
  try {
    load_manifest(d / "v.json");
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind(), LoadError::Kind::VersionMismatch);
  }
  j = io::read_json(d / "manifest.json");
  j["samples"][0].erase("duration");
  io::write_json(d / "s.json", j);
  try {
    load_manifest(d / "s.json");
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind(), LoadError::Kind::Schema);
  }
  std::filesystem::remove(d / m.samples[1].tensor);
  try {
    load_manifest(d / "manifest.json");
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind(), LoadError::Kind::MissingFile);
    EXPECT_NE(std::string(e.what()).find(m.samples[1].id), std::string::npos);
  }
}

TEST(Storage, TensorSidecar) {
  const auto d = testing::temp_dir("tensor");
  write_tensor_f32(d / "t.f32", {2, 3}, {1, 2, 3, 4, 5, 6});
  std::vector<int> shape;
  EXPECT_EQ(read_tensor_f32(d / "t.f32", &shape), (std::vector<float>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(shape, (std::vector<int>{2, 3}));
  EXPECT_THROW(read_tensor_f32(d / "missing.f32", &shape), LoadError);
}

VideoSample toy() {
  VideoSample s;
  s.id = "toy";
  s.fps = 4.0;
  s.units = s.valid_units = 40;  // 10 s
  s.duration = 10.0;
  s.unit_shape = {1};
  s.payload = Payload::Features;
  for (int i = 0; i < 40; ++i) s.data.push_back(static_cast<float>(i));
  s.annotations = {{{1.0, 3.0}, std::nullopt}, {{4.0, 9.0}, std::nullopt}};
  return s;
}

TEST(Windowing, CropKeepsCenteredEventsAndClips) {
  const VideoSample w = crop_window(toy(), 16, 1, 8);  // [2 s, 6 s)
  EXPECT_DOUBLE_EQ(w.time_offset, 2.0);
  EXPECT_DOUBLE_EQ(w.duration, 4.0);
  ASSERT_EQ(w.annotations.size(), 1u);  // center 2 in, center 6.5 out
  EXPECT_EQ(w.annotations[0].segment, (Segment{0.0, 1.0}));
  EXPECT_EQ(w.data.front(), 8.0f);
}

TEST(Windowing, StrideAndPadding) {
  const VideoSample w = crop_window(toy(), 16, 2, 10);  // strided units 20..35 -> 10 real
  EXPECT_EQ(w.valid_units, 10);
  EXPECT_DOUBLE_EQ(w.fps, 2.0);
  EXPECT_EQ(w.data[0], 20.0f);
  EXPECT_EQ(w.data[9], 38.0f);
  EXPECT_EQ(w.data[10], 0.0f);
  EXPECT_EQ(strided_units(toy(), 3), 14);
}

TEST(Windowing, TilesCoverTheVideo) {
  const auto tiles = tile_windows(toy(), 16, 1, 8);
  ASSERT_FALSE(tiles.empty());
  EXPECT_DOUBLE_EQ(tiles.front().time_offset, 0.0);
  EXPECT_DOUBLE_EQ(tiles.back().time_offset + tiles.back().duration, 10.0);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const VideoSample w = sample_window(toy(), 16, 1, rng);
    EXPECT_EQ(w.valid_units, 16);
  }
}

}  // namespace
}  // namespace segloc
