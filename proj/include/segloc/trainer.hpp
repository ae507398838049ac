// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "segloc/data.hpp"
#include "segloc/model.hpp"
#include "segloc/rng.hpp"
#include "segloc/targets.hpp"
#include "segloc/tasks.hpp"

namespace segloc {

/// One optimization stage. Parameter learning rate = lr[group], unless the
/// parameter name contains a key of `lr_override`, which then wins.
struct StageConfig {
  std::string name = "single";
  std::set<std::string> frozen;
  std::map<std::string, double> lr;
  std::map<std::string, double> lr_override;
  int epochs = 1;
  int batch = 4;
  double clip_norm = 1.0;
  double weight_decay = 0.05;
  double warmup_frac = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  /// Throws ConfigError when a trainable group has no learning rate.
  void validate(const std::vector<std::string>& groups) const;
  double lr_for(const std::string& group, const std::string& name) const;
  nlohmann::json to_json() const;
  static StageConfig from_json(const nlohmann::json& j);
};

/// Video frozen; text at base/10; fusion, pyramid and head at base.
StageConfig make_stage1(double base_lr);
/// Text frozen; video at base/10; the fusion block's text-side key/value
/// projections (`cross_kv`) at base/5; the rest at base.
StageConfig make_stage2(double base_lr);
/// Tasks without text: nothing frozen, video at base * video_ratio. The
/// stand-in encoder trains from scratch, hence the ratio defaults to 1.
StageConfig make_single(double base_lr, double video_ratio = 1.0);
/// Stage 1 + Stage 2 for text tasks, the single stage otherwise.
std::vector<StageConfig> make_schedule(const TaskSpec& spec, double base_lr, double video_ratio = 1.0);

struct TrainOptions {
  int window = 0;            // strided units per training window, 0 = whole video
  int stride = 1;
  int eval_hop = 0;          // tiling hop for evaluation, 0 = window / 2
  int max_queries = 0;       // per video and step, 0 = all
  int chunk_threshold = 0;   // encode with chunking from this many units on, 0 = never
  int chunks = 4;
  bool checkpoint = true;
  double base_range = 4.0;   // seconds, level-0 regression bucket
  AssignConfig assign;
  LossConfig loss;
  double score_threshold = 1e-3;
  int pre_nms_topk = 2000;
  bool instance_norm = false;  // GEBD Rel.Dis. normalization by mean event length
  std::filesystem::path log_path;  // JSON-lines step log, empty = none

  nlohmann::json to_json() const;
  static TrainOptions from_json(const nlohmann::json& j);
};

template <class T>
struct TrainState {
  ModelParams<T> params;
  std::vector<Tensor<T>> m, v;  // Adam moments, parallel to params
  std::string stage;            // name of the stage in progress or last finished
  int epoch = 0;                // epochs finished in `stage`
  std::int64_t stage_step = 0;  // optimizer steps in `stage`
  std::int64_t step = 0;        // optimizer steps overall
  Rng rng;
  nlohmann::json history = nlohmann::json::array();

  static TrainState fresh(ModelParams<T> p);
};

/// Runs `cfg` from where `state` stands: a state whose `stage` differs from
/// cfg.name starts the stage (moments of trainable parameters reset, RNG
/// reseeded from cfg.seed); otherwise it resumes at state.epoch. Stops after
/// epoch `stop_after` when >= 0. Throws DivergenceError on a non-finite loss
/// or gradient.
template <class T>
void train_stage(TrainState<T>& state, const StageConfig& cfg, const std::vector<VideoSample>& data,
                 const TaskSpec& spec, const TrainOptions& opt, int stop_after = -1);

/// Per video (and per query for text tasks) finalized outputs.
struct VideoOutput {
  std::string id;
  double duration = 0.0;
  std::vector<std::string> queries;  // query texts, text tasks only
  std::vector<TaskOutput> outputs;   // one per query, or one for the video
};

template <class T>
std::vector<VideoOutput> infer(const ModelParams<T>& params, const std::vector<VideoSample>& data, const TaskSpec& spec,
                               const TrainOptions& opt);

/// Metric report of `outputs` against the annotations of `data`.
nlohmann::json metric_report(const std::vector<VideoOutput>& outputs, const std::vector<VideoSample>& data,
                             const TaskSpec& spec, bool instance_norm);

template <class T>
nlohmann::json evaluate(const ModelParams<T>& params, const std::vector<VideoSample>& data, const TaskSpec& spec,
                        const TrainOptions& opt);

/// {video id -> predictions} (or boundaries for GEBD, per-query lists for
/// text tasks).
nlohmann::json predictions_json(const std::vector<VideoOutput>& outputs, const TaskSpec& spec);

template <class T>
void save_state(const std::filesystem::path& path, const TrainState<T>& s);
/// Throws LoadError on a missing, corrupt or inconsistent file, or one
/// saved in the other precision.
template <class T>
TrainState<T> load_state(const std::filesystem::path& path);

}  // namespace segloc
