// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/chunking.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <string>

#include "segloc/error.hpp"
#include "segloc/ops.hpp"
#include "segloc/rng.hpp"

namespace segloc {

using ag::Var;

std::vector<int> ChunkPlan::clip_sizes() const {
  std::vector<int> out;
  for (const auto& [lo, hi] : ranges) out.push_back((hi - lo + clip_len - 1) / clip_len);
  return out;
}

ChunkPlan plan_chunks(int frames, int t, int clip_len) {
  if (clip_len < 1 || frames < 1) throw InvalidInput("plan_chunks: frames and clip_len must be positive");
  const int clips = (frames + clip_len - 1) / clip_len;
  if (t < 1 || t > clips)
    throw InvalidInput("plan_chunks: t=" + std::to_string(t) + " outside [1, " + std::to_string(clips) + "]");
  ChunkPlan p{t, clip_len, frames, {}};
  int at = 0;
  for (int i = 0; i < t; ++i) {
    const int n = clips / t + (i < clips % t ? 1 : 0);
    const int hi = std::min(frames, at + n * clip_len);
    p.ranges.emplace_back(at, hi);
    at = hi;
  }
  return p;
}

namespace {

int step_of(const ModelConfig& cfg) { return cfg.feature_dim > 0 ? 1 : cfg.clip_len; }

void check_plan(const ChunkPlan& plan, const ModelConfig& cfg, int units) {
  if (plan.clip_len != step_of(cfg)) throw InvalidInput("chunked_encode: plan clip length differs from the model's");
  if (plan.frames != units || plan.ranges.empty() || plan.ranges.front().first != 0 || plan.ranges.back().second != units)
    throw InvalidInput("chunked_encode: plan does not cover the input");
  for (std::size_t i = 0; i < plan.ranges.size(); ++i) {
    const auto [lo, hi] = plan.ranges[i];
    if (hi <= lo || (i > 0 && plan.ranges[i - 1].second != lo))
      throw InvalidInput("chunked_encode: plan ranges are not contiguous");
    if (lo % plan.clip_len != 0 || (i + 1 < plan.ranges.size() && hi % plan.clip_len != 0))
      throw InvalidInput("chunked_encode: a chunk boundary splits a clip");
  }
}

}  // namespace

template <class T>
VideoFeatures chunked_encode(Binder<T>& b, const VideoSample& s, const ChunkPlan& plan, bool checkpoint) {
  const ModelConfig& cfg = b.params().config;
  if (s.data.size() != static_cast<std::size_t>(s.units) * s.unit_size())
    throw InvalidInput("chunked_encode: payload size does not match shape");
  check_plan(plan, cfg, s.units);
  auto& g = b.graph();
  VideoFeatures v;
  clip_masks(cfg, s.units, s.valid_units, &v.mask, &v.partial);
  const int step = step_of(cfg);
  std::vector<std::pair<int, int>> clips;
  for (const auto& [lo, hi] : plan.ranges) clips.emplace_back(lo / step, (hi + step - 1) / step);

  if (!checkpoint) {
    std::vector<Var> parts;
    for (const auto& [c0, c1] : clips) parts.push_back(encode_clips(b, s.data.data(), s.units, c0, c1));
    v.values = ag::concat_rows(g, parts);
    return v;
  }

  const int c = cfg.channels;
  const int n = clips.back().second;
  Tensor<T> out({n, c});
  for (const auto& [c0, c1] : clips) {
    ag::Graph<T> sub(g.meter());
    Binder<T> sb(sub, b.params(), nullptr);
    const Tensor<T>& y = sub.value(encode_clips(sb, s.data.data(), s.units, c0, c1));
    std::memcpy(out.row(c0), y.data(), sizeof(T) * y.size());
  }
  // The encoder parameters are the node's inputs, so it needs a backward
  // exactly when some of them are trainable.
  std::vector<Var> inputs;
  for (const auto& p : b.params().params)
    if (p.group == "video_encoder") inputs.push_back(b(p.name));
  const ModelParams<T>* params = &b.params();
  Gradients<T>* grads = b.grads();
  const std::set<std::string> frozen = b.frozen();
  const float* data = s.data.data();
  const int units = s.units;
  v.values = g.op(std::move(out), inputs, [=](ag::Graph<T>& gr, Var self) {
    const Tensor<T>& gy = gr.grad(self);
    for (const auto& [c0, c1] : clips) {
      ag::Graph<T> sub(gr.meter());
      Binder<T> sb(sub, *params, grads, frozen);
      const Var y = encode_clips(sb, data, units, c0, c1);
      Tensor<T> seed({c1 - c0, c});
      std::memcpy(seed.data(), gy.row(c0), sizeof(T) * seed.size());
      sub.backward(y, seed);
    }
  });
  return v;
}

std::size_t encoder_scalars_per_clip(const ModelConfig& cfg) {
  const std::size_t c = static_cast<std::size_t>(cfg.channels);
  if (cfg.feature_dim > 0) return static_cast<std::size_t>(cfg.feature_dim) + c;
  if (cfg.pool_only) return static_cast<std::size_t>(cfg.clip_len) * 3 + 2 * c;
  std::size_t total = 0;
  std::size_t gt = static_cast<std::size_t>(cfg.clip_len), gy = static_cast<std::size_t>(cfg.height),
              gx = static_cast<std::size_t>(cfg.width);
  std::size_t cin = 3;
  const std::size_t widths[3] = {static_cast<std::size_t>(cfg.enc_channels[0]),
                                 static_cast<std::size_t>(cfg.enc_channels[1]), c};
  for (int l = 0; l < 3; ++l) {
    const auto& k = cfg.enc_kernels[static_cast<std::size_t>(l)];
    const std::size_t taps = static_cast<std::size_t>(k[0] * k[1] * k[2]);
    gt /= static_cast<std::size_t>(k[0]);
    gy /= static_cast<std::size_t>(k[1]);
    gx /= static_cast<std::size_t>(k[2]);
    const std::size_t pos = gt * gy * gx;
    total += pos * taps * cin;   // gathered patches
    total += 2 * pos * widths[l];  // linear + relu
    cin = widths[l];
  }
  return total + c;  // pooled output
}

nlohmann::json ActivationReport::to_json() const {
  return nlohmann::json{{"t", t},
                        {"checkpoint", checkpoint},
                        {"clips", clips},
                        {"per_clip_scalars", per_clip_scalars},
                        {"peak_live_scalars", peak_live_scalars},
                        {"total_recomputed_scalars", total_recomputed_scalars},
                        {"forward_passes", forward_passes}};
}

ActivationReport activation_report(const ChunkPlan& plan, const ModelConfig& cfg, bool checkpoint) {
  ActivationReport r;
  r.t = plan.t;
  r.checkpoint = checkpoint;
  const std::vector<int> sizes = plan.clip_sizes();
  for (int s : sizes) r.clips += s;
  r.per_clip_scalars = encoder_scalars_per_clip(cfg);
  const std::size_t retained = static_cast<std::size_t>(r.clips) * static_cast<std::size_t>(cfg.channels);
  if (checkpoint) {
    const int largest = sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());
    r.peak_live_scalars = retained + static_cast<std::size_t>(largest) * r.per_clip_scalars;
    r.total_recomputed_scalars = static_cast<std::size_t>(r.clips) * r.per_clip_scalars;
    r.forward_passes = 2 * plan.t;
  } else {
    r.peak_live_scalars = retained + static_cast<std::size_t>(r.clips) * r.per_clip_scalars;
    r.forward_passes = plan.t;
  }
  return r;
}

VideoSample profile_sample(const ModelConfig& cfg, int frames, std::uint64_t seed) {
  if (frames < 1) throw InvalidInput("profile_sample: frames must be positive");
  VideoSample s;
  s.id = "profile";
  s.fps = 8.0;
  s.units = s.valid_units = frames;
  if (cfg.feature_dim > 0) {
    s.payload = Payload::Features;
    s.unit_shape = {cfg.feature_dim};
  } else {
    s.unit_shape = {cfg.height, cfg.width, 3};
  }
  s.duration = frames / s.fps;
  Rng rng(seed);
  s.data.resize(static_cast<std::size_t>(frames) * s.unit_size());
  for (float& v : s.data) v = static_cast<float>(rng.uniform());
  return s;
}

template <class T>
double time_encoder_pass(const ModelParams<T>& p, const VideoSample& s, const ChunkPlan& plan, bool checkpoint,
                         int repeats) {
  if (repeats < 1) throw InvalidInput("time_encoder_pass: repeats must be >= 1");
  std::vector<double> times;
  for (int r = 0; r < repeats; ++r) {
    Gradients<T> grads = Gradients<T>::zeros_like(p);
    const auto t0 = std::chrono::steady_clock::now();
    {
      ag::Graph<T> g;
      Binder<T> b(g, p, &grads);
      const VideoFeatures f = chunked_encode(b, s, plan, checkpoint);
      g.backward(f.values);
    }
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

template VideoFeatures chunked_encode<float>(Binder<float>&, const VideoSample&, const ChunkPlan&, bool);
template VideoFeatures chunked_encode<double>(Binder<double>&, const VideoSample&, const ChunkPlan&, bool);
template double time_encoder_pass<float>(const ModelParams<float>&, const VideoSample&, const ChunkPlan&, bool, int);
template double time_encoder_pass<double>(const ModelParams<double>&, const VideoSample&, const ChunkPlan&, bool, int);

}  // namespace segloc
