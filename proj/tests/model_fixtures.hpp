// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "segloc/chunking.hpp"
#include "segloc/model.hpp"
#include "segloc/targets.hpp"
#include "segloc/tasks.hpp"

namespace segloc::testing {

/// A model small enough for finite differences: 8x8 frames, 4-frame clips,
/// one spatial position per clip, width 8.
inline ModelConfig tiny_config(const TaskSpec& spec) {
  ModelConfig c;
  c.channels = 8;
  c.heads = 2;
  c.fusion_blocks = 1;
  c.pyramid_levels = 3;
  c.clip_len = 4;
  c.height = c.width = 8;
  c.enc_kernels = {{{1, 2, 2}, {2, 2, 2}, {2, 2, 2}}};
  c.enc_channels = {4, 4};
  c.head_layers = 1;
  return config_for_task(c, spec);
}

/// 16 s of noise at 4 fps with two events (labels 0 and 1), one query each.
inline VideoSample tiny_video(const ModelConfig& cfg, std::uint64_t seed, int frames = 64) {
  VideoSample s = profile_sample(cfg, frames, seed);
  s.id = "tiny";
  s.fps = 4.0;
  s.duration = frames / s.fps;
  s.annotations = {{{2.0, 5.0}, 0}, {{8.0, 14.0}, 1}};
  s.queries = {{{1, 2, 9, 12}, "the red square rising", {2.0, 5.0}}, {{1, 3, 10, 13}, "q", {8.0, 14.0}}};
  return s;
}

/// Full loss of one item (a query when `query` >= 0, else the whole video),
/// accumulating parameter gradients into `grads` when given.
template <class T>
double item_loss(const ModelParams<T>& p, const VideoSample& s, int query, const TaskSpec& spec,
                 Gradients<T>* grads = nullptr, const std::set<std::string>& frozen = {}) {
  ag::Graph<T> g;
  Binder<T> b(g, p, grads, frozen);
  const VideoFeatures vf = encode_video(b, s);
  ag::Var fused;
  std::vector<Annotation> anns = s.annotations;
  if (query >= 0) {
    const TextFeatures q = encode_text(b, s.queries[static_cast<std::size_t>(query)].tokens);
    fused = fuse(b, vf, &q);
    anns = {{s.queries[static_cast<std::size_t>(query)].target, std::nullopt}};
  } else {
    fused = fuse(b, vf, nullptr);
  }
  const DenseOutputs d = head_forward(b, build_pyramid(b, fused, vf.mask), spec);
  const AnchorGrid grid = build_anchor_grid(d.level_lengths, s.fps, p.config.clip_len, 2.0);
  const TrainingTargets t = assign_targets(anns, grid, d.mask, {}, spec.uses_saliency);
  const LossParts lp = total_loss(g, d, t);
  if (grads != nullptr) g.backward(lp.total);
  return lp.value;
}

/// Relative gradient error per parameter group: analytic gradients against
/// central differences on up to `per_param` entries of every parameter.
inline std::map<std::string, double> group_grad_errors(const ModelParams<double>& p0, const VideoSample& s, int query,
                                                       const TaskSpec& spec, int per_param = 4, double h = 1e-6) {
  ModelParams<double> p = p0;
  Gradients<double> grads = Gradients<double>::zeros_like(p);
  item_loss(p, s, query, spec, &grads);
  std::map<std::string, std::array<double, 3>> acc;  // diff^2, analytic^2, numeric^2
  for (std::size_t i = 0; i < p.params.size(); ++i) {
    Tensor<double>& v = p.params[i].value;
    const std::size_t n = v.size();
    const std::size_t step = std::max<std::size_t>(1, n / static_cast<std::size_t>(per_param));
    for (std::size_t k = 0; k < n; k += step) {
      const double x = v[k];
      v[k] = x + h;
      const double up = item_loss(p, s, query, spec);
      v[k] = x - h;
      const double down = item_loss(p, s, query, spec);
      v[k] = x;
      const double num = (up - down) / (2 * h), ana = grads.g[i][k];
      auto& a = acc[p.params[i].group];
      a[0] += (num - ana) * (num - ana);
      a[1] += ana * ana;
      a[2] += num * num;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [grp, a] : acc) out[grp] = std::sqrt(a[0]) / std::max({std::sqrt(a[1]), std::sqrt(a[2]), 1e-10});
  return out;
}

}  // namespace segloc::testing
