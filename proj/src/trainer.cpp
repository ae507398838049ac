// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "segloc/archive.hpp"
#include "segloc/chunking.hpp"
#include "segloc/error.hpp"
#include "segloc/io.hpp"
#include "segloc/metrics.hpp"
#include "segloc/ops.hpp"

namespace segloc {

using nlohmann::json;
using ag::Var;

// ------------------------------------------------------------------ stages

void StageConfig::validate(const std::vector<std::string>& groups) const {
  if (epochs < 0) throw ConfigError("stage " + name + ": epochs must be >= 0");
  if (batch < 1) throw ConfigError("stage " + name + ": batch must be >= 1");
  if (!(clip_norm > 0.0)) throw ConfigError("stage " + name + ": clip_norm must be positive");
  for (const std::string& g : groups) {
    if (frozen.count(g)) continue;
    auto it = lr.find(g);
    if (it == lr.end()) throw ConfigError("stage " + name + ": trainable group " + g + " has no learning rate");
    if (!(it->second >= 0.0)) throw ConfigError("stage " + name + ": negative learning rate for " + g);
  }
}

double StageConfig::lr_for(const std::string& group, const std::string& name) const {
  for (const auto& [key, value] : lr_override)
    if (name.find(key) != std::string::npos) return value;
  return lr.at(group);
}

json StageConfig::to_json() const {
  return json{{"name", name},         {"frozen", frozen},           {"lr", lr},
              {"lr_override", lr_override}, {"epochs", epochs},      {"batch", batch},
              {"clip_norm", clip_norm}, {"weight_decay", weight_decay}, {"warmup_frac", warmup_frac},
              {"beta1", beta1},       {"beta2", beta2},             {"eps", eps},
              {"seed", seed}};
}

StageConfig StageConfig::from_json(const json& j) {
  StageConfig c;
  try {
    c.name = j.at("name").get<std::string>();
    c.frozen = j.value("frozen", std::set<std::string>{});
    c.lr = j.at("lr").get<std::map<std::string, double>>();
    c.lr_override = j.value("lr_override", std::map<std::string, double>{});
    c.epochs = j.value("epochs", c.epochs);
    c.batch = j.value("batch", c.batch);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.warmup_frac = j.value("warmup_frac", c.warmup_frac);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("stage config: ") + e.what());
  }
  return c;
}

namespace {

void check_base(double base_lr) {
  if (!(base_lr > 0.0)) throw ConfigError("base learning rate must be positive");
}

}  // namespace

StageConfig make_stage1(double base_lr) {
  check_base(base_lr);
  StageConfig c;
  c.name = "stage1";
  c.frozen = {"video_encoder"};
  c.lr = {{"text_encoder", base_lr / 10}, {"fusion", base_lr}, {"pyramid", base_lr}, {"head", base_lr}};
  return c;
}

StageConfig make_stage2(double base_lr) {
  check_base(base_lr);
  StageConfig c;
  c.name = "stage2";
  c.frozen = {"text_encoder"};
  c.lr = {{"video_encoder", base_lr / 10}, {"fusion", base_lr}, {"pyramid", base_lr}, {"head", base_lr}};
  c.lr_override = {{"cross_kv", base_lr / 5}};
  return c;
}

StageConfig make_single(double base_lr, double video_ratio) {
  check_base(base_lr);
  StageConfig c;
  c.name = "single";
  c.lr = {{"video_encoder", base_lr * video_ratio}, {"fusion", base_lr}, {"pyramid", base_lr}, {"head", base_lr}};
  return c;
}

std::vector<StageConfig> make_schedule(const TaskSpec& spec, double base_lr, double video_ratio) {
  if (spec.uses_text) return {make_stage1(base_lr), make_stage2(base_lr)};
  return {make_single(base_lr, video_ratio)};
}

// ----------------------------------------------------------------- options

json TrainOptions::to_json() const {
  return json{{"window", window},
              {"stride", stride},
              {"eval_hop", eval_hop},
              {"max_queries", max_queries},
              {"chunk_threshold", chunk_threshold},
              {"chunks", chunks},
              {"checkpoint", checkpoint},
              {"base_range", base_range},
              {"center_radius", assign.center_radius},
              {"alpha", loss.alpha},
              {"gamma", loss.gamma},
              {"lambda_reg", loss.lambda_reg},
              {"lambda_sal", loss.lambda_sal},
              {"margin", loss.margin},
              {"score_threshold", score_threshold},
              {"pre_nms_topk", pre_nms_topk},
              {"instance_norm", instance_norm}};
}

TrainOptions TrainOptions::from_json(const json& j) {
  TrainOptions o;
  if (!j.is_object()) throw ConfigError("train options must be a JSON object");
  const json def = o.to_json();
  for (const auto& item : j.items())
    if (!def.contains(item.key())) throw ConfigError("unknown train option '" + item.key() + "'");
  try {
    o.window = j.value("window", o.window);
    o.stride = j.value("stride", o.stride);
    o.eval_hop = j.value("eval_hop", o.eval_hop);
    o.max_queries = j.value("max_queries", o.max_queries);
    o.chunk_threshold = j.value("chunk_threshold", o.chunk_threshold);
    o.chunks = j.value("chunks", o.chunks);
    o.checkpoint = j.value("checkpoint", o.checkpoint);
    o.base_range = j.value("base_range", o.base_range);
    o.assign.center_radius = j.value("center_radius", o.assign.center_radius);
    o.loss.alpha = j.value("alpha", o.loss.alpha);
    o.loss.gamma = j.value("gamma", o.loss.gamma);
    o.loss.lambda_reg = j.value("lambda_reg", o.loss.lambda_reg);
    o.loss.lambda_sal = j.value("lambda_sal", o.loss.lambda_sal);
    o.loss.margin = j.value("margin", o.loss.margin);
    o.score_threshold = j.value("score_threshold", o.score_threshold);
    o.pre_nms_topk = j.value("pre_nms_topk", o.pre_nms_topk);
    o.instance_norm = j.value("instance_norm", o.instance_norm);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train options: ") + e.what());
  }
  if (o.window < 0 || o.stride < 1 || o.eval_hop < 0 || o.max_queries < 0 || o.chunk_threshold < 0 || o.chunks < 1)
    throw ConfigError("train options: window/stride/hop/chunks out of range");
  return o;
}

template <class T>
TrainState<T> TrainState<T>::fresh(ModelParams<T> p) {
  TrainState<T> s;
  s.params = std::move(p);
  for (const auto& q : s.params.params) {
    s.m.emplace_back(q.value.shape());
    s.v.emplace_back(q.value.shape());
  }
  return s;
}

// ------------------------------------------------------------ forward pass

namespace {

int feature_unit(const ModelConfig& cfg) { return cfg.feature_dim > 0 ? 1 : cfg.clip_len; }

VideoSample whole_window(const VideoSample& s, int stride) {
  return crop_window(s, std::max(1, strided_units(s, stride)), stride, 0);
}

template <class T>
VideoFeatures encode_for(Binder<T>& b, const VideoSample& w, const TrainOptions& opt) {
  const ModelConfig& cfg = b.params().config;
  if (opt.chunk_threshold > 0 && w.units >= opt.chunk_threshold) {
    const int unit = feature_unit(cfg);
    const int clips = (w.units + unit - 1) / unit;
    const ChunkPlan plan = plan_chunks(w.units, std::min(opt.chunks, clips), unit);
    return chunked_encode(b, w, plan, opt.checkpoint);
  }
  return encode_video(b, w);
}

/// Fusion through head for one item (a query, or the whole video).
template <class T>
DenseOutputs item_forward(Binder<T>& b, const VideoFeatures& vf, const std::vector<int>* tokens, const TaskSpec& spec) {
  Var fused;
  if (tokens != nullptr) {
    const TextFeatures q = encode_text(b, *tokens);
    fused = fuse(b, vf, &q);
  } else {
    fused = fuse(b, vf, nullptr);
  }
  return head_forward(b, build_pyramid(b, fused, vf.mask), spec);
}

double lr_multiplier(std::int64_t step, std::int64_t total, double warmup_frac) {
  const std::int64_t warm =
      warmup_frac > 0.0 ? std::max<std::int64_t>(1, std::llround(warmup_frac * static_cast<double>(total))) : 0;
  if (step < warm) return static_cast<double>(step + 1) / static_cast<double>(warm);
  const double progress = static_cast<double>(step - warm) / static_cast<double>(std::max<std::int64_t>(1, total - warm));
  return 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, progress)));
}

struct StepLoss {
  double total = 0.0, cls = 0.0, reg = 0.0, sal = 0.0;
};

}  // namespace

// ---------------------------------------------------------------- training

template <class T>
void train_stage(TrainState<T>& state, const StageConfig& cfg, const std::vector<VideoSample>& data,
                 const TaskSpec& spec, const TrainOptions& opt, int stop_after) {
  spec.validate();
  if (cfg.epochs == 0) return;
  std::vector<std::string> groups;
  for (const auto& p : state.params.params)
    if (std::find(groups.begin(), groups.end(), p.group) == groups.end()) groups.push_back(p.group);
  cfg.validate(groups);
  if (spec.uses_text != state.params.config.text) throw ConfigError("task and model disagree about text input");
  if (state.m.size() != state.params.params.size()) throw InvalidInput("train state has no optimizer moments");

  auto trainable = [&](const Param<T>& p) { return cfg.frozen.count(p.group) == 0; };
  if (state.stage != cfg.name) {
    for (std::size_t i = 0; i < state.params.params.size(); ++i)
      if (trainable(state.params.params[i])) {
        state.m[i].fill(T(0));
        state.v[i].fill(T(0));
      }
    state.stage = cfg.name;
    state.epoch = 0;
    state.stage_step = 0;
    state.rng = Rng(cfg.seed);
  }

  std::ofstream log;
  if (!opt.log_path.empty()) log.open(opt.log_path, std::ios::app);

  const int n = static_cast<int>(data.size());
  const std::int64_t steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
  Gradients<T> grads = Gradients<T>::zeros_like(state.params);

  while (state.epoch < cfg.epochs && (stop_after < 0 || state.epoch < stop_after)) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    state.rng.shuffle(order.begin(), order.end());
    StepLoss epoch_loss;
    int epoch_steps = 0;

    for (int b0 = 0; b0 < n; b0 += cfg.batch) {
      const int b1 = std::min(n, b0 + cfg.batch);
      // Draw every window (and query subset) before any compute, so the
      // RNG stream does not depend on the model.
      std::vector<VideoSample> windows;
      std::vector<std::vector<int>> picks;
      int items = 0;
      for (int k = b0; k < b1; ++k) {
        const VideoSample& s = data[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
        VideoSample w = opt.window > 0 ? sample_window(s, opt.window, opt.stride, state.rng) : whole_window(s, opt.stride);
        std::vector<int> pick;
        if (spec.uses_text) {
          pick.resize(w.queries.size());
          std::iota(pick.begin(), pick.end(), 0);
          if (opt.max_queries > 0 && static_cast<int>(pick.size()) > opt.max_queries) {
            state.rng.shuffle(pick.begin(), pick.end());
            pick.resize(static_cast<std::size_t>(opt.max_queries));
            std::sort(pick.begin(), pick.end());
          }
        } else {
          pick.push_back(-1);
        }
        items += static_cast<int>(pick.size());
        windows.push_back(std::move(w));
        picks.push_back(std::move(pick));
      }

      grads.zero();
      StepLoss step_loss;
      for (std::size_t k = 0; k < windows.size() && items > 0; ++k) {
        const VideoSample& w = windows[k];
        if (picks[k].empty()) continue;
        ag::Graph<T> g;
        Binder<T> b(g, state.params, &grads, cfg.frozen);
        const VideoFeatures vf = encode_for(b, w, opt);
        std::vector<Var> losses;
        for (int qi : picks[k]) {
          const std::vector<int>* tokens = qi >= 0 ? &w.queries[static_cast<std::size_t>(qi)].tokens : nullptr;
          const DenseOutputs d = item_forward(b, vf, tokens, spec);
          const AnchorGrid grid =
              build_anchor_grid(d.level_lengths, w.fps, feature_unit(state.params.config), opt.base_range);
          std::vector<Annotation> anns;
          if (qi >= 0) {
            anns.push_back(Annotation{w.queries[static_cast<std::size_t>(qi)].target, std::nullopt});
          } else {
            anns = w.annotations;
          }
          const TrainingTargets tt = assign_targets(anns, grid, d.mask, opt.assign, spec.uses_saliency);
          const LossParts lp = total_loss(g, d, tt, opt.loss);
          losses.push_back(lp.total);
          step_loss.total += lp.value / items;
          step_loss.cls += lp.cls / items;
          step_loss.reg += lp.reg / items;
          step_loss.sal += lp.sal / items;
        }
        const Var root = ag::weighted_sum(g, losses, std::vector<T>(losses.size(), T(1) / static_cast<T>(items)));
        g.backward(root);
      }

      double sq = 0.0;
      for (std::size_t i = 0; i < grads.g.size(); ++i) {
        if (!trainable(state.params.params[i])) continue;
        for (T x : grads.g[i].vec()) sq += static_cast<double>(x) * static_cast<double>(x);
      }
      const double norm = std::sqrt(sq);
      if (!std::isfinite(step_loss.total) || !std::isfinite(norm)) {
        std::string ids;
        for (const auto& w : windows) ids += (ids.empty() ? "" : ",") + w.id;
        throw DivergenceError("non-finite " + std::string(std::isfinite(step_loss.total) ? "gradient" : "loss") +
                              " in " + cfg.name + " epoch " + std::to_string(state.epoch) + " step " +
                              std::to_string(state.stage_step) + " (videos " + ids + "; cls " +
                              std::to_string(step_loss.cls) + ", reg " + std::to_string(step_loss.reg) + ", sal " +
                              std::to_string(step_loss.sal) + ")");
      }
      const double clip = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      const double mult = lr_multiplier(state.stage_step, total_steps, cfg.warmup_frac);
      const double t = static_cast<double>(state.stage_step + 1);
      const double bc1 = 1.0 - std::pow(cfg.beta1, t), bc2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t i = 0; i < grads.g.size(); ++i) {
        Param<T>& p = state.params.params[i];
        if (!trainable(p)) continue;
        const double lr = cfg.lr_for(p.group, p.name) * mult;
        const bool decay = p.value.ndim() >= 2;
        Tensor<T>& m = state.m[i];
        Tensor<T>& v = state.v[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
          const double gj = static_cast<double>(grads.g[i][j]) * clip;
          const double mj = cfg.beta1 * static_cast<double>(m[j]) + (1.0 - cfg.beta1) * gj;
          const double vj = cfg.beta2 * static_cast<double>(v[j]) + (1.0 - cfg.beta2) * gj * gj;
          m[j] = static_cast<T>(mj);
          v[j] = static_cast<T>(vj);
          double x = static_cast<double>(p.value[j]);
          if (decay) x -= lr * cfg.weight_decay * x;
          x -= lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.eps);
          p.value[j] = static_cast<T>(x);
        }
      }

      if (log.is_open()) {
        json lrs = json::object();
        for (const auto& [group, value] : cfg.lr)
          if (!cfg.frozen.count(group)) lrs[group] = value * mult;
        log << json{{"step", state.step},       {"stage", cfg.name},     {"epoch", state.epoch},
                    {"loss", step_loss.total},  {"cls", step_loss.cls},  {"reg", step_loss.reg},
                    {"sal", step_loss.sal},     {"grad_norm", norm},     {"lr", lrs}}
                   .dump()
            << '\n';
        log.flush();
      }
      epoch_loss.total += step_loss.total;
      epoch_loss.cls += step_loss.cls;
      epoch_loss.reg += step_loss.reg;
      epoch_loss.sal += step_loss.sal;
      ++epoch_steps;
      ++state.stage_step;
      ++state.step;
    }
    const double k = std::max(1, epoch_steps);
    state.history.push_back(json{{"stage", cfg.name},
                                 {"epoch", state.epoch},
                                 {"loss", epoch_loss.total / k},
                                 {"cls", epoch_loss.cls / k},
                                 {"reg", epoch_loss.reg / k},
                                 {"sal", epoch_loss.sal / k}});
    ++state.epoch;
  }
}

// --------------------------------------------------------------- inference

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

template <class T>
std::vector<VideoOutput> infer(const ModelParams<T>& params, const std::vector<VideoSample>& data, const TaskSpec& spec,
                               const TrainOptions& opt) {
  spec.validate();
  std::vector<VideoOutput> out;
  for (const VideoSample& s : data) {
    std::vector<VideoSample> windows;
    if (opt.window > 0 && strided_units(s, opt.stride) > opt.window) {
      windows = tile_windows(s, opt.window, opt.stride, opt.eval_hop > 0 ? opt.eval_hop : std::max(1, opt.window / 2));
    } else {
      windows.push_back(whole_window(s, opt.stride));
    }
    const std::size_t items = spec.uses_text ? s.queries.size() : 1;
    std::vector<std::vector<Prediction>> raw(items);
    std::vector<std::vector<double>> sal(items);
    for (const VideoSample& w : windows) {
      ag::Graph<T> g;
      Binder<T> b(g, params, nullptr);
      const VideoFeatures vf = encode_video(b, w);
      for (std::size_t q = 0; q < items; ++q) {
        const DenseOutputs d = item_forward(b, vf, spec.uses_text ? &s.queries[q].tokens : nullptr, spec);
        const DenseValues<T> dv = dense_values(g, d);
        const AnchorGrid grid = build_anchor_grid(d.level_lengths, w.fps, feature_unit(params.config), opt.base_range);
        for (Prediction p : decode_predictions(dv, grid, opt.score_threshold, opt.pre_nms_topk, w.duration)) {
          p.segment = clip_segment(Segment{p.segment.start + w.time_offset, p.segment.end + w.time_offset}, s.duration);
          raw[q].push_back(p);
        }
        if (d.saliency) {
          const int k = dv.logits.cols();
          for (int i = 0; i < d.level_lengths[0]; ++i)
            if (d.mask[static_cast<std::size_t>(i)]) sal[q].push_back(sigmoid(static_cast<double>(dv.logits.at(i, k - 1))));
        }
      }
    }
    VideoOutput vo;
    vo.id = s.id;
    vo.duration = s.duration;
    for (std::size_t q = 0; q < items; ++q) {
      TaskOutput o = finalize_predictions(spec, raw[q], s.duration);
      o.saliency = std::move(sal[q]);
      vo.outputs.push_back(std::move(o));
      if (spec.uses_text) vo.queries.push_back(s.queries[q].text);
    }
    out.push_back(std::move(vo));
  }
  return out;
}

json metric_report(const std::vector<VideoOutput>& outputs, const std::vector<VideoSample>& data, const TaskSpec& spec,
                   bool instance_norm) {
  if (outputs.size() != data.size()) throw InvalidInput("metric_report: outputs and dataset differ in length");
  json r{{"task", task_name(spec.kind)}};
  if (spec.kind == TaskKind::TAL) {
    std::vector<std::vector<Prediction>> preds;
    std::vector<std::vector<metrics::LabeledSegment>> gts;
    for (std::size_t i = 0; i < data.size(); ++i) {
      preds.push_back(outputs[i].outputs.at(0).predictions);
      std::vector<metrics::LabeledSegment> g;
      for (const Annotation& a : data[i].annotations) g.push_back({a.segment, a.label.value_or(0)});
      gts.push_back(std::move(g));
    }
    const auto d = metrics::detection_map(preds, gts, metrics::kThumosThresholds, spec.num_classes);
    const auto sw = metrics::average_map_sweep(preds, gts, spec.num_classes);
    r["thresholds"] = d.thresholds;
    r["map"] = d.map;
    r["average_map"] = d.average_map;
    r["sweep"] = json{{"thresholds", sw.thresholds}, {"map", sw.map}, {"average_map", sw.average_map}};
    r["counts"] = json{{"videos", data.size()},
                       {"predictions", d.num_predictions},
                       {"ground_truths", d.num_ground_truths},
                       {"excluded_classes", d.excluded_classes}};
  } else if (spec.uses_text) {
    std::vector<std::vector<Prediction>> ranked;
    std::vector<Segment> gt;
    std::vector<std::vector<metrics::LabeledSegment>> gts;
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t q = 0; q < data[i].queries.size(); ++q) {
        ranked.push_back(outputs[i].outputs.at(q).predictions);
        gt.push_back(data[i].queries[q].target);
        gts.push_back({{data[i].queries[q].target, 0}});
      }
    const std::vector<double> thr{0.3, 0.5, 0.7};
    std::vector<double> r1, r5;
    for (double t : thr) {
      r1.push_back(metrics::recall_at_k(ranked, gt, 1, t));
      r5.push_back(metrics::recall_at_k(ranked, gt, 5, t));
    }
    r["thresholds"] = thr;
    r["recall_at_1"] = r1;
    r["recall_at_5"] = r5;
    if (spec.kind == TaskKind::MR) {
      const auto sw = metrics::average_map_sweep(ranked, gts, 1);
      r["sweep"] = json{{"thresholds", sw.thresholds}, {"map", sw.map}, {"average_map", sw.average_map}};
    }
    r["counts"] = json{{"videos", data.size()}, {"queries", ranked.size()}};
  } else {
    std::vector<BoundarySet> preds, gts;
    std::vector<double> norms;
    int total_gt = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      preds.push_back(outputs[i].outputs.at(0).boundaries.value_or(BoundarySet{{0.0, data[i].duration}, data[i].duration}));
      std::vector<Segment> segs;
      double len = 0.0;
      for (const Annotation& a : data[i].annotations) {
        segs.push_back(a.segment);
        len += a.segment.length();
      }
      gts.push_back(segments_to_boundaries(segs, data[i].duration));
      total_gt += static_cast<int>(gts.back().interior().size());
      norms.push_back(instance_norm && !segs.empty() ? len / static_cast<double>(segs.size()) : data[i].duration);
    }
    const auto f = metrics::gebd_f1_dataset(preds, gts, metrics::kRelDisThresholds, norms);
    r["thresholds"] = f.thresholds;
    r["f1"] = f.f1;
    r["precision"] = f.precision;
    r["recall"] = f.recall;
    r["average_f1"] = f.average;
    r["norm"] = instance_norm ? "instance" : "video";
    r["counts"] = json{{"videos", data.size()}, {"ground_truth_boundaries", total_gt}};
  }
  return r;
}

template <class T>
json evaluate(const ModelParams<T>& params, const std::vector<VideoSample>& data, const TaskSpec& spec,
              const TrainOptions& opt) {
  return metric_report(infer(params, data, spec, opt), data, spec, opt.instance_norm);
}

json predictions_json(const std::vector<VideoOutput>& outputs, const TaskSpec& spec) {
  auto list = [](const std::vector<Prediction>& ps) {
    json a = json::array();
    for (const Prediction& p : ps) {
      json j{{"start", p.segment.start}, {"end", p.segment.end}, {"score", p.score}};
      if (p.label) j["label"] = *p.label;
      a.push_back(j);
    }
    return a;
  };
  json out = json::object();
  for (const VideoOutput& v : outputs) {
    if (spec.kind == TaskKind::GEBD) {
      const TaskOutput& o = v.outputs.at(0);
      out[v.id] = json{{"duration", v.duration},
                       {"boundaries", o.boundaries ? o.boundaries->boundaries : std::vector<double>{0.0, v.duration}}};
    } else if (spec.uses_text) {
      json a = json::array();
      for (std::size_t q = 0; q < v.outputs.size(); ++q) {
        json j{{"query", v.queries[q]}, {"predictions", list(v.outputs[q].predictions)}};
        if (!v.outputs[q].saliency.empty()) j["saliency"] = v.outputs[q].saliency;
        a.push_back(j);
      }
      out[v.id] = a;
    } else {
      out[v.id] = list(v.outputs.at(0).predictions);
    }
  }
  return out;
}

// -------------------------------------------------------------- persistence

template <class T>
void save_state(const std::filesystem::path& path, const TrainState<T>& s) {
  Archive a;
  a.dtype = std::is_same_v<T, double> ? Dtype::Float64 : Dtype::Float32;
  a.meta = json{{"model", s.params.config.to_json()},
                {"state", json{{"stage", s.stage},
                               {"epoch", s.epoch},
                               {"stage_step", s.stage_step},
                               {"step", s.step},
                               {"rng", s.rng.state()},
                               {"history", s.history}}}};
  auto push = [&](const std::string& name, const std::string& group, const Tensor<T>& t) {
    NamedArray arr{name, group, t.shape(), {}};
    arr.data.assign(t.vec().begin(), t.vec().end());
    a.arrays.push_back(std::move(arr));
  };
  for (std::size_t i = 0; i < s.params.params.size(); ++i) push(s.params.params[i].name, s.params.params[i].group, s.params.params[i].value);
  for (std::size_t i = 0; i < s.params.params.size(); ++i) push("adam_m/" + s.params.params[i].name, "adam_m", s.m[i]);
  for (std::size_t i = 0; i < s.params.params.size(); ++i) push("adam_v/" + s.params.params[i].name, "adam_v", s.v[i]);
  write_archive(path, a);
}

template <class T>
TrainState<T> load_state(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  auto schema = [&](const std::string& m) { return LoadError(LoadError::Kind::Schema, path.string() + ": " + m); };
  const Dtype want = std::is_same_v<T, double> ? Dtype::Float64 : Dtype::Float32;
  if (a.dtype != want)
    throw schema("state was saved in " + dtype_name(a.dtype) + ", resume needs " + dtype_name(want));
  TrainState<T> s;
  try {
    s = TrainState<T>::fresh(init_params<T>(ModelConfig::from_json(a.meta.at("model")), 0));
    const json& st = a.meta.at("state");
    s.stage = st.at("stage").get<std::string>();
    s.epoch = st.at("epoch").get<int>();
    s.stage_step = st.at("stage_step").get<std::int64_t>();
    s.step = st.at("step").get<std::int64_t>();
    s.rng.set_state(st.at("rng").get<std::string>());
    s.history = st.at("history");
  } catch (const json::exception& e) {
    throw schema(e.what());
  } catch (const ConfigError& e) {
    throw schema(e.what());
  } catch (const InvalidInput& e) {
    throw schema(e.what());
  }
  if (a.arrays.size() != 3 * s.params.params.size()) throw schema("array count does not match the model config");
  auto fill = [&](const std::string& name, Tensor<T>& t) {
    const NamedArray* arr = a.find(name);
    if (arr == nullptr) throw schema("missing array " + name);
    if (arr->shape != t.shape()) throw schema("array " + name + " has the wrong shape");
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = static_cast<T>(arr->data[j]);
  };
  for (std::size_t i = 0; i < s.params.params.size(); ++i) {
    fill(s.params.params[i].name, s.params.params[i].value);
    fill("adam_m/" + s.params.params[i].name, s.m[i]);
    fill("adam_v/" + s.params.params[i].name, s.v[i]);
  }
  return s;
}

#define SEGLOC_INSTANTIATE_TRAINER(T)                                                                           \
  template struct TrainState<T>;                                                                               \
  template void train_stage<T>(TrainState<T>&, const StageConfig&, const std::vector<VideoSample>&,            \
                               const TaskSpec&, const TrainOptions&, int);                                      \
  template std::vector<VideoOutput> infer<T>(const ModelParams<T>&, const std::vector<VideoSample>&,           \
                                             const TaskSpec&, const TrainOptions&);                             \
  template json evaluate<T>(const ModelParams<T>&, const std::vector<VideoSample>&, const TaskSpec&,           \
                            const TrainOptions&);                                                               \
  template void save_state<T>(const std::filesystem::path&, const TrainState<T>&);                             \
  template TrainState<T> load_state<T>(const std::filesystem::path&);

SEGLOC_INSTANTIATE_TRAINER(float)
SEGLOC_INSTANTIATE_TRAINER(double)

}  // namespace segloc
