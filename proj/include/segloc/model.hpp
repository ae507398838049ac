// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "segloc/autograd.hpp"
#include "segloc/data.hpp"
#include "segloc/segments.hpp"
#include "segloc/tasks.hpp"

namespace segloc {

inline const std::vector<std::string> kParamGroups{"video_encoder", "text_encoder", "fusion", "pyramid", "head"};

enum class TextInit {
  Random,     // independent N(0, 1) rows
  Collapsed,  // every row = one shared vector + text_spread * N(0, 1) noise
};

struct ModelConfig {
  int channels = 128;
  int heads = 4;
  int fusion_blocks = 2;
  int pyramid_levels = 5;
  int clip_len = 16;
  int height = 32;
  int width = 32;
  /// Clip encoder: three non-overlapping 3-D convolutions, kernel = stride
  /// (t, h, w). Their temporal product must equal clip_len and their
  /// spatial products must divide height and width.
  std::array<std::array<int, 3>, 3> enc_kernels{{{2, 4, 4}, {2, 2, 2}, {4, 2, 2}}};
  std::array<int, 2> enc_channels{16, 32};
  bool pool_only = false;
  int feature_dim = 0;  // > 0: inputs are precomputed feature sequences
  bool text = true;
  int text_layers = 1;
  TextInit text_init = TextInit::Random;
  double text_spread = 1e-3;
  int num_classes = 0;
  bool saliency = false;
  int head_layers = 2;
  double prior_prob = 0.01;
  double offset_bias = 1.0;

  void validate() const;
  /// Positions left per clip after the last convolution.
  int clip_positions() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Model config matching a task: class head width, saliency column, text.
ModelConfig config_for_task(ModelConfig base, const TaskSpec& spec);

template <class T>
struct Param {
  std::string group;
  std::string name;  // full name "<group>.<...>"
  Tensor<T> value;
};

/// Named parameters in a fixed creation order, grouped by module.
template <class T>
class ModelParams {
 public:
  ModelConfig config;
  std::vector<Param<T>> params;

  Tensor<T>& add(const std::string& group, const std::string& local, Tensor<T> value);
  int index(const std::string& name) const;  // -1 if absent
  bool has(const std::string& name) const { return index(name) >= 0; }
  const Tensor<T>& get(const std::string& name) const;
  Tensor<T>& get(const std::string& name);
  std::size_t scalar_count() const;
  std::size_t scalar_count(const std::string& group) const;

 private:
  std::map<std::string, int> index_;
};

/// Gradient buffers parallel to ModelParams::params.
template <class T>
struct Gradients {
  std::vector<Tensor<T>> g;

  static Gradients zeros_like(const ModelParams<T>& p);
  void zero();
};

/// Deterministic initialization from `seed`.
template <class T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& p, const nlohmann::json& extra = {});
/// Throws LoadError on a missing/corrupt file or a parameter set that does
/// not match the stored config.
template <class T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

/// Hands out one graph leaf per parameter. Parameters of frozen groups (or
/// all parameters when `grads` is null) are leaves without a gradient sink.
template <class T>
class Binder {
 public:
  Binder(ag::Graph<T>& g, const ModelParams<T>& p, Gradients<T>* grads, std::set<std::string> frozen = {})
      : g_(g), p_(p), grads_(grads), frozen_(std::move(frozen)) {}

  ag::Var operator()(const std::string& name);
  ag::Graph<T>& graph() { return g_; }
  const ModelParams<T>& params() const { return p_; }
  Gradients<T>* grads() const { return grads_; }
  const std::set<std::string>& frozen() const { return frozen_; }

 private:
  ag::Graph<T>& g_;
  const ModelParams<T>& p_;
  Gradients<T>* grads_;
  std::set<std::string> frozen_;
  std::map<int, ag::Var> cache_;
};

/// Per-step video representation [T_feat, C] with validity. `partial` marks
/// steps built partly from padding.
struct VideoFeatures {
  ag::Var values;
  std::vector<std::uint8_t> mask;
  std::vector<std::uint8_t> partial;
};

struct TextFeatures {
  ag::Var values;  // [L, C]
  std::vector<std::uint8_t> mask;
};

struct PyramidFeatures {
  std::vector<ag::Var> levels;  // [T_l, C]
  std::vector<std::vector<std::uint8_t>> masks;
  std::vector<int> lengths() const;
};

/// Head outputs for all levels stacked along rows (level 0 first).
struct DenseOutputs {
  ag::Var offsets;  // [N, 2], non-negative, stride units
  ag::Var logits;   // [N, 1 + m (+1 if saliency)]: confidence, classes, saliency
  std::vector<int> level_lengths;
  std::vector<std::uint8_t> mask;  // [N]
  int num_classes = 0;
  bool saliency = false;
};

/// Plain-value copy of DenseOutputs for decoding.
template <class T>
struct DenseValues {
  Tensor<T> offsets;
  Tensor<T> logits;
  std::vector<int> level_lengths;
  std::vector<std::uint8_t> mask;
  int num_classes = 0;
  bool saliency = false;
};

template <class T>
DenseValues<T> dense_values(const ag::Graph<T>& g, const DenseOutputs& d);

/// ceil(T / 2^l) for l < levels.
std::vector<int> pyramid_lengths(int t_feat, int levels);

/// Number of feature steps for `units` frames (or feature steps).
int feature_steps(const ModelConfig& cfg, int units);

/// Encodes frames [begin_clip, end_clip) clip-wise; every clip is encoded
/// independently of the others. `frames` holds `units` frames of H x W x 3,
/// the first `valid_units` of which are real.
template <class T>
ag::Var encode_clips(Binder<T>& b, const float* frames, int units, int begin_clip, int end_clip);

/// Validity and partial-padding flags of every clip.
void clip_masks(const ModelConfig& cfg, int units, int valid_units, std::vector<std::uint8_t>* mask,
                std::vector<std::uint8_t>* partial);

template <class T>
VideoFeatures encode_video(Binder<T>& b, const VideoSample& s);

/// Throws InvalidInput on an out-of-vocabulary token or an empty query.
template <class T>
TextFeatures encode_text(Binder<T>& b, const std::vector<int>& tokens);

/// Throws InvalidInput if `q` is present with an all-false mask.
template <class T>
ag::Var fuse(Binder<T>& b, const VideoFeatures& v, const TextFeatures* q);

template <class T>
PyramidFeatures build_pyramid(Binder<T>& b, ag::Var fused, const std::vector<std::uint8_t>& mask);

/// Throws ConfigError when the task does not match the head's width.
template <class T>
DenseOutputs head_forward(Binder<T>& b, const PyramidFeatures& p, const TaskSpec& spec);

struct AnchorGrid;

/// Anchor-free decoding. TAL yields one prediction per (anchor, class).
template <class T>
std::vector<Prediction> decode_predictions(const DenseValues<T>& d, const AnchorGrid& anchors, double score_threshold,
                                           int pre_nms_topk, double duration);

/// Sinusoidal positional table [n, c].
template <class T>
Tensor<T> sinusoid_table(int n, int c);

}  // namespace segloc
