// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "json.hpp"
#include "segloc/data.hpp"
#include "segloc/model.hpp"

namespace segloc {

/// Contiguous partition of the frame axis into `t` chunks. Every chunk is a
/// whole number of clips except possibly the last, which ends at `frames`.
struct ChunkPlan {
  int t = 1;
  int clip_len = 1;
  int frames = 0;
  std::vector<std::pair<int, int>> ranges;  // [lo, hi) in frames

  /// Chunk sizes in clips.
  std::vector<int> clip_sizes() const;
};

/// Equal split in clip units, larger chunks first. Throws InvalidInput
/// unless 1 <= t <= ceil(frames / clip_len).
ChunkPlan plan_chunks(int frames, int t, int clip_len);

/// Encodes chunk by chunk and concatenates. With `checkpoint`, each chunk is
/// run in a scratch graph whose activations are dropped right away; the
/// backward pass re-runs the chunk and pushes its gradient straight into
/// the binder's gradient buffers. `s` must outlive the backward pass.
/// Outputs equal encode_video bit for bit.
template <class T>
VideoFeatures chunked_encode(Binder<T>& b, const VideoSample& s, const ChunkPlan& plan, bool checkpoint);

/// Activation scalars the encoder keeps per clip (patches, conv outputs,
/// nonlinearities, pooled output).
std::size_t encoder_scalars_per_clip(const ModelConfig& cfg);

/// Analytic activation accounting of one forward + backward through the
/// encoder. Retained outputs cost clips x C. Without checkpointing every
/// chunk's internals stay alive until backward; with it only the largest
/// chunk's internals are alive at once (during its recompute).
struct ActivationReport {
  int t = 1;
  bool checkpoint = false;
  int clips = 0;
  std::size_t per_clip_scalars = 0;
  std::size_t peak_live_scalars = 0;
  std::size_t total_recomputed_scalars = 0;
  int forward_passes = 0;  // t without checkpointing, 2t with

  nlohmann::json to_json() const;
};

ActivationReport activation_report(const ChunkPlan& plan, const ModelConfig& cfg, bool checkpoint);

/// Uniform-noise input of `frames` units shaped for `cfg`.
VideoSample profile_sample(const ModelConfig& cfg, int frames, std::uint64_t seed);

/// Median wall-clock seconds of one encoder forward + backward under `plan`.
template <class T>
double time_encoder_pass(const ModelParams<T>& p, const VideoSample& s, const ChunkPlan& plan, bool checkpoint,
                         int repeats);

}  // namespace segloc
