// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "segloc/rng.hpp"
#include "segloc/segments.hpp"
#include "segloc/tasks.hpp"

namespace segloc {

inline constexpr const char* kManifestVersion = "1";

struct Annotation {
  Segment segment;
  std::optional<int> label;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct QueryAnnotation {
  std::vector<int> tokens;
  std::string text;
  Segment target;

  friend bool operator==(const QueryAnnotation&, const QueryAnnotation&) = default;
};

enum class Payload { Frames, Features };

/// One video. The temporal unit is a frame (Payload::Frames, unit_shape
/// {H, W, 3}) or a feature step (Payload::Features, unit_shape {C}); `fps`
/// is units per second either way. Units at index >= valid_units are
/// zero padding.
struct VideoSample {
  std::string id;
  double fps = 8.0;
  double duration = 0.0;
  Payload payload = Payload::Frames;
  std::vector<int> unit_shape;
  int units = 0;
  int valid_units = 0;
  std::vector<float> data;
  std::vector<Annotation> annotations;
  std::vector<QueryAnnotation> queries;
  std::vector<double> saliency;  // per saliency step, optional
  double saliency_step = 0.0;    // seconds per saliency entry
  double time_offset = 0.0;      // window start in source-video seconds

  std::size_t unit_size() const;
  const float* unit(int i) const { return data.data() + static_cast<std::size_t>(i) * unit_size(); }
  /// Throws InvalidInput when the payload or annotations are inconsistent.
  void validate() const;
};

/// Fixed token vocabulary of the template queries "the <color> <shape>
/// <motion>".
struct Vocabulary {
  static const std::vector<std::string>& colors();
  static const std::vector<std::string>& shapes();
  static const std::vector<std::string>& motions();
  /// All tokens; id 0 is padding, id 1 is "the".
  static const std::vector<std::string>& tokens();
  static int color_token(int c);
  static int shape_token(int s);
  static int motion_token(int m);
};

struct GenSpec {
  TaskKind task = TaskKind::TVG;
  int videos = 64;
  int height = 32;
  int width = 32;
  double fps = 8.0;
  int quantum_frames = 16;        // event boundaries snap to this grid
  double min_duration = 16.0;     // seconds
  double max_duration = 32.0;
  int min_events = 1;
  int max_events = 3;
  double min_event = 4.0;         // seconds
  double max_event = 12.0;
  double min_gap = 2.0;           // background between events, seconds
  int colors = 5;                 // attribute grammar size
  int shapes = 4;
  int motions = 3;
  int num_classes = 3;            // TAL: class = color index < num_classes
  double noise = 0.1;             // std-dev of additive pixel noise
  bool saliency = false;          // per-clip saliency (MR)
  int saliency_step_frames = 16;

  /// Throws GenerationError when the spec cannot be satisfied.
  void validate() const;
  nlohmann::json to_json() const;
  static GenSpec from_json(const nlohmann::json& j);
};

struct SampleRecord {
  std::string id;
  double duration = 0.0;
  double fps = 0.0;
  std::string tensor;  // path relative to the manifest directory
  Payload payload = Payload::Frames;
  std::vector<Annotation> annotations;
  std::vector<QueryAnnotation> queries;
  std::vector<double> saliency;
  double saliency_step = 0.0;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct Manifest {
  std::string version = kManifestVersion;
  TaskKind task = TaskKind::TVG;
  std::vector<std::string> classes;
  std::vector<std::string> vocabulary;
  nlohmann::json generator;  // GenSpec + seed, informational
  std::vector<SampleRecord> samples;
  std::filesystem::path root;  // directory tensor paths are relative to; not serialized

  bool operator==(const Manifest& o) const;
};

/// Renders every video in memory. Pure function of (spec, seed).
std::vector<VideoSample> generate_samples(const GenSpec& spec, std::uint64_t seed);

/// Renders the dataset into `dir` (tensor files plus manifest.json) and
/// returns the manifest.
Manifest generate_dataset(const GenSpec& spec, std::uint64_t seed, const std::filesystem::path& dir);

/// Manifest for samples already in memory; writes their tensors into `dir`.
Manifest write_samples(const std::vector<VideoSample>& samples, TaskKind task, const std::vector<std::string>& classes,
                       const nlohmann::json& generator, const std::filesystem::path& dir);

nlohmann::json manifest_to_json(const Manifest& m);
void save_manifest(const Manifest& m, const std::filesystem::path& path);
/// Throws LoadError: MissingFile (manifest or a referenced tensor, naming
/// the sample id), VersionMismatch, or Schema.
Manifest load_manifest(const std::filesystem::path& path);

VideoSample load_sample(const Manifest& m, std::size_t index);
std::vector<VideoSample> load_samples(const Manifest& m);

/// Float32 tensor file plus `<path>.json` sidecar {shape, dtype}.
void write_tensor_f32(const std::filesystem::path& path, const std::vector<int>& shape, const std::vector<float>& data);
std::vector<float> read_tensor_f32(const std::filesystem::path& path, std::vector<int>* shape);

/// Subsamples units by `stride` and crops `window` consecutive strided
/// units starting at strided index `offset`. Annotations and queries are kept
/// iff their center lies in the window, then clipped to it. A window longer
/// than the remaining video is zero padded (valid_units marks real units).
VideoSample crop_window(const VideoSample& s, int window, int stride, int offset);

/// Training crop at a uniformly random valid offset.
VideoSample sample_window(const VideoSample& s, int window, int stride, Rng& rng);

/// Evaluation tiling: offsets 0, hop, 2*hop, ... until the video is covered.
std::vector<VideoSample> tile_windows(const VideoSample& s, int window, int stride, int hop);

/// Number of strided units of `s` at `stride`.
int strided_units(const VideoSample& s, int stride);

}  // namespace segloc
