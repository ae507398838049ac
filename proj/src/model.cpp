// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "segloc/archive.hpp"
#include "segloc/error.hpp"
#include "segloc/ops.hpp"
#include "segloc/postprocess.hpp"
#include "segloc/rng.hpp"
#include "segloc/targets.hpp"

namespace segloc {

using nlohmann::json;
using ag::Var;

// ----------------------------------------------------------------- config

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (channels < 1 || heads < 1 || channels % heads != 0) fail("channels must be a positive multiple of heads");
  if (fusion_blocks < 0 || pyramid_levels < 1 || text_layers < 0 || head_layers < 0) fail("negative depth");
  if (clip_len < 1) fail("clip_len must be >= 1");
  if (num_classes < 0) fail("num_classes must be >= 0");
  if (!(prior_prob > 0.0 && prior_prob < 1.0)) fail("prior_prob must lie in (0, 1)");
  if (feature_dim < 0) fail("feature_dim must be >= 0");
  if (!(text_spread >= 0.0)) fail("text_spread must be >= 0");
  if (feature_dim == 0 && !pool_only) {
    int kt = 1, kh = 1, kw = 1;
    for (const auto& k : enc_kernels) {
      if (k[0] < 1 || k[1] < 1 || k[2] < 1) fail("encoder kernels must be positive");
      kt *= k[0];
      kh *= k[1];
      kw *= k[2];
    }
    if (kt != clip_len) fail("encoder temporal kernels must multiply to clip_len");
    if (height % kh != 0 || width % kw != 0) fail("encoder spatial kernels must divide the frame size");
    if (enc_channels[0] < 1 || enc_channels[1] < 1) fail("encoder widths must be positive");
  }
}

int ModelConfig::clip_positions() const {
  int kh = 1, kw = 1;
  for (const auto& k : enc_kernels) {
    kh *= k[1];
    kw *= k[2];
  }
  return (height / kh) * (width / kw);
}

json ModelConfig::to_json() const {
  return json{{"channels", channels},
              {"heads", heads},
              {"fusion_blocks", fusion_blocks},
              {"pyramid_levels", pyramid_levels},
              {"clip_len", clip_len},
              {"height", height},
              {"width", width},
              {"enc_kernels", enc_kernels},
              {"enc_channels", enc_channels},
              {"pool_only", pool_only},
              {"feature_dim", feature_dim},
              {"text", text},
              {"text_layers", text_layers},
              {"text_init", text_init == TextInit::Random ? "random" : "collapsed"},
              {"text_spread", text_spread},
              {"num_classes", num_classes},
              {"saliency", saliency},
              {"head_layers", head_layers},
              {"prior_prob", prior_prob},
              {"offset_bias", offset_bias}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig c;
  const json def = c.to_json();
  for (const auto& item : j.items())
    if (!def.contains(item.key())) throw ConfigError("unknown model field '" + item.key() + "'");
  try {
    auto get = [&](const char* k, auto& dst) {
      if (j.contains(k)) dst = j.at(k).get<std::decay_t<decltype(dst)>>();
    };
    get("channels", c.channels);
    get("heads", c.heads);
    get("fusion_blocks", c.fusion_blocks);
    get("pyramid_levels", c.pyramid_levels);
    get("clip_len", c.clip_len);
    get("height", c.height);
    get("width", c.width);
    get("enc_kernels", c.enc_kernels);
    get("enc_channels", c.enc_channels);
    get("pool_only", c.pool_only);
    get("feature_dim", c.feature_dim);
    get("text", c.text);
    get("text_layers", c.text_layers);
    if (j.contains("text_init")) {
      const std::string s = j.at("text_init").get<std::string>();
      if (s == "random") {
        c.text_init = TextInit::Random;
      } else if (s == "collapsed") {
        c.text_init = TextInit::Collapsed;
      } else {
        throw ConfigError("text_init must be 'random' or 'collapsed'");
      }
    }
    get("text_spread", c.text_spread);
    get("num_classes", c.num_classes);
    get("saliency", c.saliency);
    get("head_layers", c.head_layers);
    get("prior_prob", c.prior_prob);
    get("offset_bias", c.offset_bias);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig config_for_task(ModelConfig base, const TaskSpec& spec) {
  base.num_classes = spec.kind == TaskKind::TAL ? spec.num_classes : 0;
  base.saliency = spec.uses_saliency;
  base.text = spec.uses_text;
  return base;
}

// ------------------------------------------------------------- parameters

template <class T>
Tensor<T>& ModelParams<T>::add(const std::string& group, const std::string& local, Tensor<T> value) {
  const std::string name = group + "." + local;
  if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
  index_[name] = static_cast<int>(params.size());
  params.push_back(Param<T>{group, name, std::move(value)});
  return params.back().value;
}

template <class T>
int ModelParams<T>::index(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

template <class T>
const Tensor<T>& ModelParams<T>::get(const std::string& name) const {
  const int i = index(name);
  if (i < 0) throw ConfigError("unknown parameter " + name);
  return params[static_cast<std::size_t>(i)].value;
}

template <class T>
Tensor<T>& ModelParams<T>::get(const std::string& name) {
  const int i = index(name);
  if (i < 0) throw ConfigError("unknown parameter " + name);
  return params[static_cast<std::size_t>(i)].value;
}

template <class T>
std::size_t ModelParams<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

template <class T>
std::size_t ModelParams<T>::scalar_count(const std::string& group) const {
  std::size_t n = 0;
  for (const auto& p : params)
    if (p.group == group) n += p.value.size();
  return n;
}

template <class T>
Gradients<T> Gradients<T>::zeros_like(const ModelParams<T>& p) {
  Gradients<T> g;
  for (const auto& q : p.params) g.g.emplace_back(q.value.shape());
  return g;
}

template <class T>
void Gradients<T>::zero() {
  for (auto& t : g) t.fill(T(0));
}

namespace {

template <class T>
Tensor<T> uniform_tensor(std::vector<int> shape, double a, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-a, a));
  return t;
}

template <class T>
struct Init {
  ModelParams<T>& p;
  Rng& rng;

  void linear(const std::string& group, const std::string& name, int in, int out, double wscale = 1.0,
              double bias = 0.0) {
    const double a = wscale * std::sqrt(6.0 / (in + out));
    p.add(group, name + ".w", uniform_tensor<T>({in, out}, a, rng));
    p.add(group, name + ".b", Tensor<T>({out}, static_cast<T>(bias)));
  }
  void norm(const std::string& group, const std::string& name, int c) {
    p.add(group, name + ".g", Tensor<T>({c}, T(1)));
    p.add(group, name + ".b", Tensor<T>({c}, T(0)));
  }
};

}  // namespace

template <class T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams<T> p;
  p.config = cfg;
  Rng rng(seed);
  Init<T> in{p, rng};
  const int c = cfg.channels;

  if (cfg.feature_dim > 0) {
    in.linear("video_encoder", "feat_proj", cfg.feature_dim, c);
  } else if (cfg.pool_only) {
    in.linear("video_encoder", "pool_proj", cfg.clip_len * 3, c);
  } else {
    const auto& k = cfg.enc_kernels;
    const int c1 = cfg.enc_channels[0], c2 = cfg.enc_channels[1];
    in.linear("video_encoder", "conv1", k[0][0] * k[0][1] * k[0][2] * 3, c1);
    in.linear("video_encoder", "conv2", k[1][0] * k[1][1] * k[1][2] * c1, c2);
    in.linear("video_encoder", "conv3", k[2][0] * k[2][1] * k[2][2] * c2, c);
  }

  if (cfg.text) {
    const int vocab = static_cast<int>(Vocabulary::tokens().size());
    Tensor<T> emb({vocab, c});
    if (cfg.text_init == TextInit::Random) {
      for (std::size_t i = 0; i < emb.size(); ++i) emb[i] = static_cast<T>(rng.normal());
    } else {
      std::vector<double> shared(static_cast<std::size_t>(c));
      for (double& v : shared) v = rng.normal();
      for (int r = 0; r < vocab; ++r)
        for (int j = 0; j < c; ++j) emb.at(r, j) = static_cast<T>(shared[static_cast<std::size_t>(j)] + cfg.text_spread * rng.normal());
    }
    p.add("text_encoder", "embed", std::move(emb));
    for (int l = 0; l < cfg.text_layers; ++l) {
      const std::string b = "layer" + std::to_string(l);
      in.norm("text_encoder", b + ".ln1", c);
      in.linear("text_encoder", b + ".qkv", c, 3 * c);
      in.linear("text_encoder", b + ".out", c, c);
      in.norm("text_encoder", b + ".ln2", c);
      in.linear("text_encoder", b + ".ffn1", c, 2 * c);
      in.linear("text_encoder", b + ".ffn2", 2 * c, c);
    }
    in.norm("text_encoder", "ln_out", c);
  }

  for (int i = 0; i < cfg.fusion_blocks; ++i) {
    const std::string b = "block" + std::to_string(i);
    in.norm("fusion", b + ".ln_sa", c);
    in.linear("fusion", b + ".sa_qkv", c, 3 * c);
    in.linear("fusion", b + ".sa_out", c, c);
    if (cfg.text) {
      in.norm("fusion", b + ".ln_ca", c);
      in.linear("fusion", b + ".ca_q", c, c);
      in.linear("fusion", b + ".cross_kv", c, 2 * c);
      // Zero output projection: the text branch starts as an exact no-op.
      in.linear("fusion", b + ".ca_out", c, c, 0.0);
    }
    in.norm("fusion", b + ".ln_ff", c);
    in.linear("fusion", b + ".ff1", c, 2 * c);
    in.linear("fusion", b + ".ff2", 2 * c, c);
  }

  for (int l = 1; l < cfg.pyramid_levels; ++l) {
    in.linear("pyramid", "conv" + std::to_string(l), 3 * c, c);
    in.norm("pyramid", "ln" + std::to_string(l), c);
  }

  const int cls_out = 1 + cfg.num_classes + (cfg.saliency ? 1 : 0);
  for (int i = 0; i < cfg.head_layers; ++i) {
    in.linear("head", "reg" + std::to_string(i), 3 * c, c);
    in.norm("head", "reg_ln" + std::to_string(i), c);
  }
  in.linear("head", "reg_out", 3 * c, 2, 0.01, cfg.offset_bias);
  for (int i = 0; i < cfg.head_layers; ++i) {
    in.linear("head", "cls" + std::to_string(i), 3 * c, c);
    in.norm("head", "cls_ln" + std::to_string(i), c);
  }
  in.linear("head", "cls_out", 3 * c, cls_out, 0.01);
  Tensor<T>& cb = p.get("head.cls_out.b");
  const T prior = static_cast<T>(-std::log((1.0 - cfg.prior_prob) / cfg.prior_prob));
  for (int j = 0; j < 1 + cfg.num_classes; ++j) cb[static_cast<std::size_t>(j)] = prior;
  return p;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& p, const json& extra) {
  Archive a;
  a.dtype = std::is_same_v<T, double> ? Dtype::Float64 : Dtype::Float32;
  a.meta = json{{"model", p.config.to_json()}};
  if (!extra.is_null()) a.meta["extra"] = extra;
  for (const auto& q : p.params) {
    NamedArray arr{q.name, q.group, q.value.shape(), {}};
    arr.data.assign(q.value.vec().begin(), q.value.vec().end());
    a.arrays.push_back(std::move(arr));
  }
  write_archive(path, a);
}

template <class T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path, json* extra) {
  const Archive a = read_archive(path);
  auto schema = [&](const std::string& m) { return LoadError(LoadError::Kind::Schema, path.string() + ": " + m); };
  ModelConfig cfg;
  try {
    if (!a.meta.contains("model")) throw schema("header has no model config");
    cfg = ModelConfig::from_json(a.meta.at("model"));
  } catch (const ConfigError& e) {
    throw schema(e.what());
  }
  ModelParams<T> p = init_params<T>(cfg, 0);
  if (a.arrays.size() != p.params.size()) throw schema("parameter count does not match the model config");
  for (auto& q : p.params) {
    const NamedArray* arr = a.find(q.name);
    if (arr == nullptr) throw schema("missing parameter " + q.name);
    if (arr->group != q.group || arr->shape != q.value.shape()) throw schema("parameter " + q.name + " has the wrong group or shape");
    for (std::size_t i = 0; i < q.value.size(); ++i) q.value[i] = static_cast<T>(arr->data[i]);
  }
  if (extra != nullptr) *extra = a.meta.value("extra", json());
  return p;
}

template <class T>
Var Binder<T>::operator()(const std::string& name) {
  const int i = p_.index(name);
  if (i < 0) throw ConfigError("model has no parameter " + name);
  auto it = cache_.find(i);
  if (it != cache_.end()) return it->second;
  const Param<T>& q = p_.params[static_cast<std::size_t>(i)];
  Tensor<T>* sink = (grads_ == nullptr || frozen_.count(q.group)) ? nullptr : &grads_->g[static_cast<std::size_t>(i)];
  const Var v = g_.param(q.value, sink);
  cache_[i] = v;
  return v;
}

// ---------------------------------------------------------------- helpers

std::vector<int> PyramidFeatures::lengths() const {
  std::vector<int> out;
  for (const auto& m : masks) out.push_back(static_cast<int>(m.size()));
  return out;
}

template <class T>
DenseValues<T> dense_values(const ag::Graph<T>& g, const DenseOutputs& d) {
  return DenseValues<T>{g.value(d.offsets), g.value(d.logits), d.level_lengths, d.mask, d.num_classes, d.saliency};
}

std::vector<int> pyramid_lengths(int t_feat, int levels) {
  std::vector<int> out;
  int t = t_feat;
  for (int l = 0; l < levels; ++l) {
    out.push_back(t);
    t = (t + 1) / 2;
  }
  return out;
}

int feature_steps(const ModelConfig& cfg, int units) {
  return cfg.feature_dim > 0 ? units : (units + cfg.clip_len - 1) / cfg.clip_len;
}

template <class T>
Tensor<T> sinusoid_table(int n, int c) {
  Tensor<T> t({n, c});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; j += 2) {
      const double f = std::pow(10000.0, -static_cast<double>(j) / c);
      t.at(i, j) = static_cast<T>(std::sin(i * f));
      if (j + 1 < c) t.at(i, j + 1) = static_cast<T>(std::cos(i * f));
    }
  return t;
}

namespace {

template <class T>
Var lin(Binder<T>& b, Var x, const std::string& name) {
  return ag::linear(b.graph(), x, b(name + ".w"), b(name + ".b"));
}

template <class T>
Var norm(Binder<T>& b, Var x, const std::string& name) {
  return ag::layer_norm(b.graph(), x, b(name + ".g"), b(name + ".b"));
}

/// Multi-head self-attention with a fused qkv projection.
template <class T>
Var self_attention(Binder<T>& b, Var x, const std::string& qkv, const std::string& out,
                   const std::vector<std::uint8_t>& mask, int heads) {
  auto& g = b.graph();
  const int c = g.value(x).cols();
  const Var h = lin(b, x, qkv);
  const Var q = ag::slice_cols(g, h, 0, c), k = ag::slice_cols(g, h, c, 2 * c), v = ag::slice_cols(g, h, 2 * c, 3 * c);
  return lin(b, ag::attention(g, q, k, v, mask, heads), out);
}

/// Row indices of a kernel-3, stride-`stride`, pad-1 temporal convolution
/// within each segment of `lengths` (rows of segments are stacked).
ag::Index conv3_index(const std::vector<int>& in_lengths, const std::vector<int>& out_lengths, int stride) {
  auto idx = std::make_shared<std::vector<int>>();
  int in_base = 0;
  for (std::size_t s = 0; s < in_lengths.size(); ++s) {
    for (int i = 0; i < out_lengths[s]; ++i)
      for (int d = -1; d <= 1; ++d) {
        const int src = i * stride + d;
        idx->push_back(src >= 0 && src < in_lengths[s] ? in_base + src : -1);
      }
    in_base += in_lengths[s];
  }
  return idx;
}

}  // namespace

// ---------------------------------------------------------------- encoder

void clip_masks(const ModelConfig& cfg, int units, int valid_units, std::vector<std::uint8_t>* mask,
                std::vector<std::uint8_t>* partial) {
  const int step = cfg.feature_dim > 0 ? 1 : cfg.clip_len;
  const int n = feature_steps(cfg, units);
  mask->assign(static_cast<std::size_t>(n), 0);
  partial->assign(static_cast<std::size_t>(n), 0);
  for (int k = 0; k < n; ++k) {
    const bool any = k * step < valid_units;
    (*mask)[static_cast<std::size_t>(k)] = any;
    (*partial)[static_cast<std::size_t>(k)] = any && (k + 1) * step > valid_units;
  }
}

template <class T>
Var encode_clips(Binder<T>& b, const float* frames, int units, int begin_clip, int end_clip) {
  auto& g = b.graph();
  const ModelConfig& cfg = b.params().config;
  const int n_clips = end_clip - begin_clip;
  if (n_clips <= 0) throw InvalidInput("encode_clips: empty clip range");

  if (cfg.feature_dim > 0) {
    auto idx = std::make_shared<std::vector<int>>();
    for (int k = begin_clip; k < end_clip; ++k) idx->push_back(k < units ? k : -1);
    return lin(b, ag::gather_rows_const(g, frames, cfg.feature_dim, idx, 1), "video_encoder.feat_proj");
  }

  const int h = cfg.height, w = cfg.width, cl = cfg.clip_len;
  const std::size_t frame_size = static_cast<std::size_t>(h) * w * 3;

  if (cfg.pool_only) {
    // Per-frame channel means, summed in sorted order so the value does not
    // depend on where pixels sit in the frame.
    Tensor<T> pooled({n_clips, cl * 3});
    std::vector<float> vals(static_cast<std::size_t>(h) * w);
    for (int k = 0; k < n_clips; ++k)
      for (int f = 0; f < cl; ++f) {
        const int frame = (begin_clip + k) * cl + f;
        if (frame >= units) continue;
        const float* fr = frames + frame_size * frame;
        for (int ch = 0; ch < 3; ++ch) {
          for (std::size_t p = 0; p < vals.size(); ++p) vals[p] = fr[p * 3 + ch];
          std::sort(vals.begin(), vals.end());
          double s = 0.0;
          for (float v : vals) s += v;
          pooled.at(k, f * 3 + ch) = static_cast<T>(s / static_cast<double>(vals.size()));
        }
      }
    return ag::relu(g, lin(b, g.constant(std::move(pooled)), "video_encoder.pool_proj"));
  }

  const auto& kern = cfg.enc_kernels;
  // Grid of positions per clip after each layer.
  int gt = cl, gy = h, gx = w;
  Var x;
  for (int layer = 0; layer < 3; ++layer) {
    const int kt = kern[static_cast<std::size_t>(layer)][0], ky = kern[static_cast<std::size_t>(layer)][1],
              kx = kern[static_cast<std::size_t>(layer)][2];
    const int ot = gt / kt, oy = gy / ky, ox = gx / kx;
    auto idx = std::make_shared<std::vector<int>>();
    idx->reserve(static_cast<std::size_t>(n_clips) * ot * oy * ox * kt * ky * kx);
    for (int k = 0; k < n_clips; ++k)
      for (int t = 0; t < ot; ++t)
        for (int y = 0; y < oy; ++y)
          for (int xx = 0; xx < ox; ++xx)
            for (int dt = 0; dt < kt; ++dt)
              for (int dy = 0; dy < ky; ++dy)
                for (int dx = 0; dx < kx; ++dx) {
                  const int st = t * kt + dt, sy = y * ky + dy, sx = xx * kx + dx;
                  if (layer == 0) {
                    const int frame = (begin_clip + k) * cl + st;
                    idx->push_back(frame < units ? (frame * h + sy) * w + sx : -1);
                  } else {
                    idx->push_back(((k * gt + st) * gy + sy) * gx + sx);
                  }
                }
    const int taps = kt * ky * kx;
    const Var patches = layer == 0 ? ag::gather_rows_const(g, frames, 3, idx, taps) : ag::gather_rows(g, x, idx, taps);
    x = ag::relu(g, lin(b, patches, "video_encoder.conv" + std::to_string(layer + 1)));
    gt = ot;
    gy = oy;
    gx = ox;
  }
  return ag::group_mean(g, x, gt * gy * gx);
}

namespace {

void check_payload(const ModelConfig& cfg, const VideoSample& s) {
  if (cfg.feature_dim > 0) {
    if (s.payload != Payload::Features || s.unit_shape != std::vector<int>{cfg.feature_dim})
      throw InvalidInput("encode_video: expected features of width " + std::to_string(cfg.feature_dim));
  } else if (s.payload != Payload::Frames || s.unit_shape != std::vector<int>{cfg.height, cfg.width, 3}) {
    throw InvalidInput("encode_video: expected frames of " + std::to_string(cfg.height) + "x" +
                       std::to_string(cfg.width) + "x3, got " + shape_str(s.unit_shape));
  }
  if (s.data.size() != static_cast<std::size_t>(s.units) * s.unit_size())
    throw InvalidInput("encode_video: payload size does not match shape");
  if (s.units < 1) throw InvalidInput("encode_video: empty video");
}

}  // namespace

template <class T>
VideoFeatures encode_video(Binder<T>& b, const VideoSample& s) {
  const ModelConfig& cfg = b.params().config;
  check_payload(cfg, s);
  VideoFeatures v;
  clip_masks(cfg, s.units, s.valid_units, &v.mask, &v.partial);
  v.values = encode_clips(b, s.data.data(), s.units, 0, feature_steps(cfg, s.units));
  return v;
}

template <class T>
TextFeatures encode_text(Binder<T>& b, const std::vector<int>& tokens) {
  const ModelConfig& cfg = b.params().config;
  if (!cfg.text) throw ConfigError("model has no text encoder");
  if (tokens.empty()) throw InvalidInput("encode_text: empty query");
  const int vocab = static_cast<int>(Vocabulary::tokens().size());
  TextFeatures out;
  bool any = false;
  for (int t : tokens) {
    if (t < 0 || t >= vocab) throw InvalidInput("encode_text: token id " + std::to_string(t) + " outside vocabulary");
    out.mask.push_back(t != 0);
    any = any || t != 0;
  }
  if (!any) throw InvalidInput("encode_text: query holds only padding");
  auto& g = b.graph();
  const int l = static_cast<int>(tokens.size()), c = cfg.channels;
  auto idx = std::make_shared<std::vector<int>>(tokens);
  Var x = ag::add_const(g, ag::gather_rows(g, b("text_encoder.embed"), idx, 1), sinusoid_table<T>(l, c));
  for (int i = 0; i < cfg.text_layers; ++i) {
    const std::string p = "text_encoder.layer" + std::to_string(i);
    x = ag::add(g, x, self_attention(b, norm(b, x, p + ".ln1"), p + ".qkv", p + ".out", out.mask, cfg.heads));
    const Var h = ag::gelu(g, lin(b, norm(b, x, p + ".ln2"), p + ".ffn1"));
    x = ag::add(g, x, lin(b, h, p + ".ffn2"));
  }
  out.values = norm(b, x, "text_encoder.ln_out");
  return out;
}

template <class T>
Var fuse(Binder<T>& b, const VideoFeatures& v, const TextFeatures* q) {
  const ModelConfig& cfg = b.params().config;
  auto& g = b.graph();
  const Tensor<T>& vv = g.value(v.values);
  if (vv.cols() != cfg.channels || vv.rows() != static_cast<int>(v.mask.size()))
    throw InvalidInput("fuse: video features do not match the model width or mask");
  if (q != nullptr) {
    if (!cfg.text) throw ConfigError("fuse: model has no cross-attention");
    if (g.value(q->values).cols() != cfg.channels) throw InvalidInput("fuse: text width mismatch");
    if (std::none_of(q->mask.begin(), q->mask.end(), [](std::uint8_t m) { return m != 0; }))
      throw InvalidInput("fuse: text mask is all false");
  }
  Var x = ag::mask_rows(g, ag::add_const(g, v.values, sinusoid_table<T>(vv.rows(), cfg.channels)), v.mask);
  for (int i = 0; i < cfg.fusion_blocks; ++i) {
    const std::string p = "fusion.block" + std::to_string(i);
    x = ag::add(g, x, self_attention(b, norm(b, x, p + ".ln_sa"), p + ".sa_qkv", p + ".sa_out", v.mask, cfg.heads));
    if (q != nullptr) {
      const int c = cfg.channels;
      const Var qq = lin(b, norm(b, x, p + ".ln_ca"), p + ".ca_q");
      const Var kv = lin(b, q->values, p + ".cross_kv");
      const Var a = ag::attention(g, qq, ag::slice_cols(g, kv, 0, c), ag::slice_cols(g, kv, c, 2 * c), q->mask, cfg.heads);
      x = ag::add(g, x, lin(b, a, p + ".ca_out"));
    }
    const Var h = ag::gelu(g, lin(b, norm(b, x, p + ".ln_ff"), p + ".ff1"));
    x = ag::add(g, x, lin(b, h, p + ".ff2"));
  }
  return x;
}

template <class T>
PyramidFeatures build_pyramid(Binder<T>& b, Var fused, const std::vector<std::uint8_t>& mask) {
  const ModelConfig& cfg = b.params().config;
  auto& g = b.graph();
  const int t0 = g.value(fused).rows();
  if (t0 != static_cast<int>(mask.size())) throw InvalidInput("build_pyramid: mask length mismatch");
  PyramidFeatures p;
  p.levels.push_back(ag::mask_rows(g, fused, mask));
  p.masks.push_back(mask);
  const std::vector<int> lens = pyramid_lengths(t0, cfg.pyramid_levels);
  for (int l = 1; l < cfg.pyramid_levels; ++l) {
    const auto& prev = p.masks.back();
    std::vector<std::uint8_t> m(static_cast<std::size_t>(lens[static_cast<std::size_t>(l)]), 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const std::size_t a = 2 * i, c = 2 * i + 1;
      m[i] = prev[a] || (c < prev.size() && prev[c]);
    }
    const auto idx = conv3_index({lens[static_cast<std::size_t>(l) - 1]}, {lens[static_cast<std::size_t>(l)]}, 2);
    const std::string s = std::to_string(l);
    Var x = ag::gather_rows(g, p.levels.back(), idx, 3);
    x = ag::relu(g, norm(b, lin(b, x, "pyramid.conv" + s), "pyramid.ln" + s));
    p.levels.push_back(ag::mask_rows(g, x, m));
    p.masks.push_back(std::move(m));
  }
  return p;
}

template <class T>
DenseOutputs head_forward(Binder<T>& b, const PyramidFeatures& p, const TaskSpec& spec) {
  const ModelConfig& cfg = b.params().config;
  auto& g = b.graph();
  const int m = spec.kind == TaskKind::TAL ? spec.num_classes : 0;
  const int width = 1 + m + (spec.uses_saliency ? 1 : 0);
  if (static_cast<int>(b.params().get("head.cls_out.b").size()) != width)
    throw ConfigError("head has " + std::to_string(b.params().get("head.cls_out.b").size()) +
                      " classification outputs, task " + task_name(spec.kind) + " needs " + std::to_string(width));
  DenseOutputs d;
  d.num_classes = m;
  d.saliency = spec.uses_saliency;
  d.level_lengths = p.lengths();
  for (const auto& mk : p.masks) d.mask.insert(d.mask.end(), mk.begin(), mk.end());
  const Var x0 = ag::concat_rows(g, p.levels);
  const auto idx = conv3_index(d.level_lengths, d.level_lengths, 1);

  auto tower = [&](const std::string& name) {
    Var x = x0;
    for (int i = 0; i < cfg.head_layers; ++i) {
      const std::string s = std::to_string(i);
      x = lin(b, ag::gather_rows(g, x, idx, 3), "head." + name + s);
      x = ag::mask_rows(g, ag::relu(g, norm(b, x, "head." + name + "_ln" + s)), d.mask);
    }
    return lin(b, ag::gather_rows(g, x, idx, 3), "head." + name + "_out");
  };
  d.offsets = ag::relu(g, tower("reg"));
  d.logits = tower("cls");
  return d;
}

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

template <class T>
std::vector<Prediction> decode_predictions(const DenseValues<T>& d, const AnchorGrid& anchors, double score_threshold,
                                           int pre_nms_topk, double duration) {
  if (anchors.lengths != d.level_lengths) throw InvalidInput("decode_predictions: anchors do not match the pyramid");
  std::vector<Prediction> out;
  int row = 0;
  for (int l = 0; l < anchors.levels(); ++l) {
    const double sigma = anchors.strides[static_cast<std::size_t>(l)];
    for (int i = 0; i < anchors.lengths[static_cast<std::size_t>(l)]; ++i, ++row) {
      if (!d.mask[static_cast<std::size_t>(row)]) continue;
      const double a = anchors.times[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
      const Segment seg = clip_segment(
          Segment{a - static_cast<double>(d.offsets.at(row, 0)) * sigma, a + static_cast<double>(d.offsets.at(row, 1)) * sigma},
          duration);
      const double conf = sigmoid(static_cast<double>(d.logits.at(row, 0)));
      if (d.num_classes > 0) {
        for (int c = 0; c < d.num_classes; ++c) {
          const double s = conf * sigmoid(static_cast<double>(d.logits.at(row, 1 + c)));
          if (s >= score_threshold) out.push_back(Prediction{seg, s, c});
        }
      } else if (conf >= score_threshold) {
        out.push_back(Prediction{seg, conf, std::nullopt});
      }
    }
  }
  return postprocess::topk(std::move(out), pre_nms_topk);
}

#define SEGLOC_INSTANTIATE_MODEL(T)                                                                               \
  template class ModelParams<T>;                                                                                  \
  template struct Gradients<T>;                                                                                   \
  template class Binder<T>;                                                                                       \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                                      \
  template void save_checkpoint<T>(const std::filesystem::path&, const ModelParams<T>&, const json&);             \
  template ModelParams<T> load_checkpoint<T>(const std::filesystem::path&, json*);                                \
  template DenseValues<T> dense_values<T>(const ag::Graph<T>&, const DenseOutputs&);                              \
  template Tensor<T> sinusoid_table<T>(int, int);                                                                 \
  template Var encode_clips<T>(Binder<T>&, const float*, int, int, int);                                          \
  template VideoFeatures encode_video<T>(Binder<T>&, const VideoSample&);                                         \
  template TextFeatures encode_text<T>(Binder<T>&, const std::vector<int>&);                                      \
  template Var fuse<T>(Binder<T>&, const VideoFeatures&, const TextFeatures*);                                    \
  template PyramidFeatures build_pyramid<T>(Binder<T>&, Var, const std::vector<std::uint8_t>&);                   \
  template DenseOutputs head_forward<T>(Binder<T>&, const PyramidFeatures&, const TaskSpec&);                     \
  template std::vector<Prediction> decode_predictions<T>(const DenseValues<T>&, const AnchorGrid&, double, int,   \
                                                         double);

SEGLOC_INSTANTIATE_MODEL(float)
SEGLOC_INSTANTIATE_MODEL(double)

}  // namespace segloc
