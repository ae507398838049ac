// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>

#include "segloc/error.hpp"
#include "segloc/io.hpp"
#include "segloc/tensor.hpp"

namespace segloc {

using nlohmann::json;
using namespace io;
namespace fs = std::filesystem;

namespace {

struct Rgb {
  float r, g, b;
};

// Distinct from the 0.5 gray background in every channel.
constexpr Rgb kPalette[] = {
    {0.9f, 0.1f, 0.1f},   // red
    {0.1f, 0.8f, 0.1f},   // green
    {0.1f, 0.2f, 0.9f},   // blue
    {0.9f, 0.9f, 0.1f},   // yellow
    {0.9f, 0.1f, 0.9f},   // magenta
};

constexpr float kBackground = 0.5f;

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

// ---------------------------------------------------------------- samples

std::size_t VideoSample::unit_size() const {
  return Tensor<float>::count(unit_shape);
}

void VideoSample::validate() const {
  if (fps <= 0.0 || !std::isfinite(fps)) throw InvalidInput("sample " + id + ": fps must be positive");
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw InvalidInput("sample " + id + ": bad duration");
  if (payload == Payload::Frames && (unit_shape.size() != 3 || unit_shape[2] != 3))
    throw InvalidInput("sample " + id + ": frames must be T x H x W x 3");
  if (payload == Payload::Features && unit_shape.size() != 1)
    throw InvalidInput("sample " + id + ": features must be T x C");
  if (units < 0 || valid_units < 0 || valid_units > units)
    throw InvalidInput("sample " + id + ": inconsistent unit counts");
  if (data.size() != static_cast<std::size_t>(units) * unit_size())
    throw InvalidInput("sample " + id + ": payload size does not match shape");
  constexpr double kSlack = 1e-9;
  for (const Annotation& a : annotations)
    if (!a.segment.valid() || a.segment.end > duration + kSlack)
      throw InvalidInput("sample " + id + ": annotation outside [0, duration]");
  for (const QueryAnnotation& q : queries) {
    if (q.tokens.empty()) throw InvalidInput("sample " + id + ": empty query");
    if (!q.target.valid() || q.target.end > duration + kSlack)
      throw InvalidInput("sample " + id + ": query target outside [0, duration]");
  }
}

// ------------------------------------------------------------- vocabulary

const std::vector<std::string>& Vocabulary::colors() {
  static const std::vector<std::string> v{"red", "green", "blue", "yellow", "magenta"};
  return v;
}
const std::vector<std::string>& Vocabulary::shapes() {
  static const std::vector<std::string> v{"square", "circle", "triangle", "cross"};
  return v;
}
const std::vector<std::string>& Vocabulary::motions() {
  static const std::vector<std::string> v{"still", "sliding", "rising"};
  return v;
}
const std::vector<std::string>& Vocabulary::tokens() {
  static const std::vector<std::string> v = [] {
    std::vector<std::string> t{"<pad>", "the"};
    for (const auto& s : colors()) t.push_back(s);
    for (const auto& s : shapes()) t.push_back(s);
    for (const auto& s : motions()) t.push_back(s);
    return t;
  }();
  return v;
}
int Vocabulary::color_token(int c) { return 2 + c; }
int Vocabulary::shape_token(int s) { return 2 + static_cast<int>(colors().size()) + s; }
int Vocabulary::motion_token(int m) {
  return 2 + static_cast<int>(colors().size() + shapes().size()) + m;
}

// --------------------------------------------------------------- gen spec

namespace {

struct Quanta {
  int min_dur, max_dur, min_ev, max_ev, gap;
};

Quanta quanta(const GenSpec& g) {
  const double q = g.quantum_frames / g.fps;
  constexpr double kEps = 1e-9;
  return {static_cast<int>(std::ceil(g.min_duration / q - kEps)), static_cast<int>(std::floor(g.max_duration / q + kEps)),
          static_cast<int>(std::ceil(g.min_event / q - kEps)), static_cast<int>(std::floor(g.max_event / q + kEps)),
          static_cast<int>(std::ceil(g.min_gap / q - kEps))};
}

}  // namespace

void GenSpec::validate() const {
  auto fail = [](const std::string& m) { throw GenerationError("unsatisfiable generator spec: " + m); };
  if (videos < 0) fail("negative video count");
  if (height < 4 || width < 4) fail("frames must be at least 4x4");
  if (!(fps > 0.0)) fail("fps must be positive");
  if (quantum_frames < 1) fail("quantum_frames must be >= 1");
  if (colors < 1 || colors > static_cast<int>(Vocabulary::colors().size())) fail("colors out of range");
  if (shapes < 1 || shapes > static_cast<int>(Vocabulary::shapes().size())) fail("shapes out of range");
  if (motions < 1 || motions > static_cast<int>(Vocabulary::motions().size())) fail("motions out of range");
  if (min_events < 1 || max_events < min_events) fail("bad event-count range");
  if (noise < 0.0) fail("negative noise");
  if (saliency_step_frames < 1) fail("saliency_step_frames must be >= 1");
  const Quanta q = quanta(*this);
  if (q.min_dur < 1 || q.max_dur < q.min_dur) fail("duration range holds no whole quantum");
  if (q.min_ev < 1 || (task != TaskKind::GEBD && q.max_ev < q.min_ev)) fail("event length range holds no whole quantum");
  if (task == TaskKind::TAL && (num_classes < 1 || num_classes > colors)) fail("TAL needs 1 <= num_classes <= colors");
  if (task == TaskKind::TVG || task == TaskKind::MR) {
    if (max_events > std::min({colors, shapes, motions}))
      fail("more events than distinct attribute values");
  }
  if (task == TaskKind::GEBD) {
    if (max_events < 2) fail("GEBD needs at least 2 scenes");
    if (colors < 2) fail("GEBD needs at least 2 colors");
    if (max_events * q.min_ev > q.min_dur) fail("scenes do not fit the shortest duration");
  } else if (max_events * q.min_ev + (max_events - 1) * q.gap > q.min_dur) {
    fail("max_events x (min_event + min_gap) exceeds the shortest duration");
  }
}

json GenSpec::to_json() const {
  return json{{"task", task_name(task)},
              {"videos", videos},
              {"height", height},
              {"width", width},
              {"fps", fps},
              {"quantum_frames", quantum_frames},
              {"min_duration", min_duration},
              {"max_duration", max_duration},
              {"min_events", min_events},
              {"max_events", max_events},
              {"min_event", min_event},
              {"max_event", max_event},
              {"min_gap", min_gap},
              {"colors", colors},
              {"shapes", shapes},
              {"motions", motions},
              {"num_classes", num_classes},
              {"noise", noise},
              {"saliency", saliency},
              {"saliency_step_frames", saliency_step_frames}};
}

GenSpec GenSpec::from_json(const json& j) {
  GenSpec g;
  if (!j.is_object()) throw ConfigError("generator spec must be a JSON object");
  static const std::set<std::string> known{"task",     "videos",    "height",     "width",     "fps",
                                           "quantum_frames", "min_duration", "max_duration", "min_events",
                                           "max_events", "min_event", "max_event", "min_gap", "colors",
                                           "shapes",   "motions",   "num_classes", "noise", "saliency",
                                           "saliency_step_frames"};
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (!known.count(k)) throw ConfigError("unknown generator field '" + k + "'");
  }
  try {
    if (j.contains("task")) g.task = parse_task(j.at("task").get<std::string>());
    g.saliency = g.task == TaskKind::MR;
    auto get = [&](const char* k, auto& dst) {
      if (j.contains(k)) dst = j.at(k).get<std::decay_t<decltype(dst)>>();
    };
    get("videos", g.videos);
    get("height", g.height);
    get("width", g.width);
    get("fps", g.fps);
    get("quantum_frames", g.quantum_frames);
    get("min_duration", g.min_duration);
    get("max_duration", g.max_duration);
    get("min_events", g.min_events);
    get("max_events", g.max_events);
    get("min_event", g.min_event);
    get("max_event", g.max_event);
    get("min_gap", g.min_gap);
    get("colors", g.colors);
    get("shapes", g.shapes);
    get("motions", g.motions);
    get("num_classes", g.num_classes);
    get("noise", g.noise);
    get("saliency", g.saliency);
    get("saliency_step_frames", g.saliency_step_frames);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator spec: ") + e.what());
  }
  return g;
}

// -------------------------------------------------------------- generator

namespace {

struct Event {
  int start_q = 0, len_q = 0;
  int color = 0, shape = 0, motion = 0;
  double base_x = 0.0, base_y = 0.0;
};

// `n` non-negative integers summing to `total`, uniformly over cut points.
std::vector<int> random_partition(Rng& rng, int total, int n) {
  std::vector<int> cuts;
  for (int i = 0; i + 1 < n; ++i) cuts.push_back(static_cast<int>(rng.uniform_int(0, total)));
  std::sort(cuts.begin(), cuts.end());
  std::vector<int> parts;
  int prev = 0;
  for (int c : cuts) {
    parts.push_back(c - prev);
    prev = c;
  }
  parts.push_back(total - prev);
  return parts;
}

std::vector<int> distinct_values(Rng& rng, int pool, int n) {
  std::vector<int> v(static_cast<std::size_t>(pool));
  for (int i = 0; i < pool; ++i) v[static_cast<std::size_t>(i)] = i;
  rng.shuffle(v.begin(), v.end());
  v.resize(static_cast<std::size_t>(n));
  return v;
}

bool inside_shape(int shape, double dx, double dy, double r) {
  switch (shape) {
    case 0:
      return std::abs(dx) <= 0.8 * r && std::abs(dy) <= 0.8 * r;
    case 1:
      return dx * dx + dy * dy <= r * r;
    case 2:
      return dy >= -0.8 * r && dy <= 0.8 * r && std::abs(dx) <= 0.6 * (dy + 0.8 * r);
    default:
      return (std::abs(dx) <= r / 3.0 && std::abs(dy) <= r) || (std::abs(dy) <= r / 3.0 && std::abs(dx) <= r);
  }
}

std::vector<Event> plan_events(const GenSpec& g, const Quanta& q, int dur_q, Rng& rng) {
  std::vector<Event> ev;
  if (g.task == TaskKind::GEBD) {
    const int lo = std::max(2, g.min_events);
    const int n = static_cast<int>(rng.uniform_int(lo, g.max_events));
    const std::vector<int> extra = random_partition(rng, dur_q - n * q.min_ev, n);
    int at = 0;
    for (int i = 0; i < n; ++i) {
      Event e;
      e.start_q = at;
      e.len_q = q.min_ev + extra[static_cast<std::size_t>(i)];
      at += e.len_q;
      ev.push_back(e);
    }
    int prev = -1;
    for (Event& e : ev) {
      // Adjacent scenes never share a color.
      int c;
      if (prev < 0) {
        c = static_cast<int>(rng.uniform_int(0, g.colors - 1));
      } else {
        c = static_cast<int>(rng.uniform_int(0, g.colors - 2));
        if (c >= prev) ++c;
      }
      e.color = prev = c;
      e.shape = static_cast<int>(rng.uniform_int(0, g.shapes - 1));
      e.motion = static_cast<int>(rng.uniform_int(0, g.motions - 1));
    }
  } else {
    const int n = static_cast<int>(rng.uniform_int(g.min_events, g.max_events));
    std::vector<int> lens;
    int used = 0;
    for (int i = 0; i < n; ++i) {
      const int rest = n - i - 1;
      const int hi = std::min(q.max_ev, dur_q - used - rest * q.min_ev - (n - 1) * q.gap);
      const int len = static_cast<int>(rng.uniform_int(q.min_ev, std::max(q.min_ev, hi)));
      lens.push_back(len);
      used += len;
    }
    const std::vector<int> gaps = random_partition(rng, dur_q - used - (n - 1) * q.gap, n + 1);
    int at = gaps[0];
    for (int i = 0; i < n; ++i) {
      Event e;
      e.start_q = at;
      e.len_q = lens[static_cast<std::size_t>(i)];
      at += e.len_q + q.gap + gaps[static_cast<std::size_t>(i) + 1];
      ev.push_back(e);
    }
    if (g.task == TaskKind::TAL) {
      for (Event& e : ev) {
        e.color = static_cast<int>(rng.uniform_int(0, g.num_classes - 1));
        e.shape = static_cast<int>(rng.uniform_int(0, g.shapes - 1));
        e.motion = static_cast<int>(rng.uniform_int(0, g.motions - 1));
      }
    } else {
      const auto c = distinct_values(rng, g.colors, n);
      const auto s = distinct_values(rng, g.shapes, n);
      const auto m = distinct_values(rng, g.motions, n);
      for (int i = 0; i < n; ++i) {
        ev[static_cast<std::size_t>(i)].color = c[static_cast<std::size_t>(i)];
        ev[static_cast<std::size_t>(i)].shape = s[static_cast<std::size_t>(i)];
        ev[static_cast<std::size_t>(i)].motion = m[static_cast<std::size_t>(i)];
      }
    }
  }
  for (Event& e : ev) {
    e.base_x = rng.uniform(0.3, 0.7) * g.width;
    e.base_y = rng.uniform(0.3, 0.7) * g.height;
  }
  return ev;
}

void render(const GenSpec& g, const std::vector<Event>& events, int frames, Rng& rng, std::vector<float>& out) {
  const int h = g.height, w = g.width;
  const std::size_t frame_size = static_cast<std::size_t>(h) * w * 3;
  out.assign(frame_size * frames, kBackground);
  const double r = 0.18 * std::min(h, w);
  for (int f = 0; f < frames; ++f) {
    float* fr = out.data() + frame_size * f;
    for (const Event& e : events) {
      const int f0 = e.start_q * g.quantum_frames, f1 = (e.start_q + e.len_q) * g.quantum_frames;
      if (f < f0 || f >= f1) continue;
      const double p = (f - f0 + 0.5) / (f1 - f0);
      double cx = e.base_x, cy = e.base_y;
      if (e.motion == 1) cx = w * (0.2 + 0.6 * p);
      if (e.motion == 2) cy = h * (0.8 - 0.6 * p);
      const Rgb col = kPalette[e.color];
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (inside_shape(e.shape, x + 0.5 - cx, y + 0.5 - cy, r)) {
            float* px = fr + (static_cast<std::size_t>(y) * w + x) * 3;
            px[0] = col.r;
            px[1] = col.g;
            px[2] = col.b;
          }
    }
    if (g.noise > 0.0)
      for (std::size_t i = 0; i < frame_size; ++i) fr[i] += static_cast<float>(g.noise * rng.normal());
  }
}

std::string video_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "v%04d", i);
  return buf;
}

}  // namespace

std::vector<VideoSample> generate_samples(const GenSpec& g, std::uint64_t seed) {
  g.validate();
  const Quanta q = quanta(g);
  const double qsec = g.quantum_frames / g.fps;
  std::vector<VideoSample> out;
  out.reserve(static_cast<std::size_t>(g.videos));
  for (int i = 0; i < g.videos; ++i) {
    Rng rng = Rng::split(seed, static_cast<std::uint64_t>(i));
    const int dur_q = static_cast<int>(rng.uniform_int(q.min_dur, q.max_dur));
    const std::vector<Event> events = plan_events(g, q, dur_q, rng);

    VideoSample s;
    s.id = video_id(i);
    s.fps = g.fps;
    s.payload = Payload::Frames;
    s.unit_shape = {g.height, g.width, 3};
    s.units = s.valid_units = dur_q * g.quantum_frames;
    s.duration = dur_q * qsec;
    render(g, events, s.units, rng, s.data);

    for (const Event& e : events) {
      const Segment seg{e.start_q * qsec, (e.start_q + e.len_q) * qsec};
      Annotation a{seg, std::nullopt};
      if (g.task == TaskKind::TAL) a.label = e.color;
      s.annotations.push_back(a);
      if (g.task == TaskKind::TVG || g.task == TaskKind::MR) {
        QueryAnnotation qa;
        qa.tokens = {1, Vocabulary::color_token(e.color), Vocabulary::shape_token(e.shape),
                     Vocabulary::motion_token(e.motion)};
        qa.text = "the " + Vocabulary::colors()[static_cast<std::size_t>(e.color)] + " " +
                  Vocabulary::shapes()[static_cast<std::size_t>(e.shape)] + " " +
                  Vocabulary::motions()[static_cast<std::size_t>(e.motion)];
        qa.target = seg;
        s.queries.push_back(qa);
      }
    }
    if (g.saliency) {
      s.saliency_step = g.saliency_step_frames / g.fps;
      const int steps = ceil_div(s.units, g.saliency_step_frames);
      for (int k = 0; k < steps; ++k) {
        int covered = 0, total = 0;
        for (int f = k * g.saliency_step_frames; f < std::min(s.units, (k + 1) * g.saliency_step_frames); ++f) {
          ++total;
          for (const Event& e : events)
            if (f >= e.start_q * g.quantum_frames && f < (e.start_q + e.len_q) * g.quantum_frames) {
              ++covered;
              break;
            }
        }
        s.saliency.push_back(static_cast<double>(covered) / total);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------- tensor files

namespace {

fs::path sidecar_path(const fs::path& p) {
  fs::path s = p;
  s.replace_extension(".json");
  return s;
}

}  // namespace

void write_tensor_f32(const fs::path& path, const std::vector<int>& shape, const std::vector<float>& data) {
  if (Tensor<float>::count(shape) != data.size()) throw InvalidInput("tensor data does not match shape");
  std::string bytes(data.size() * 4, '\0');
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(data[i]);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
    std::memcpy(bytes.data() + 4 * i, &u, 4);
  }
  write_file_atomic(path, bytes);
  write_json(sidecar_path(path), json{{"shape", shape}, {"dtype", "float32"}});
}

std::vector<float> read_tensor_f32(const fs::path& path, std::vector<int>* shape) {
  const json side = read_json(sidecar_path(path));
  std::vector<int> sh;
  try {
    if (side.at("dtype").get<std::string>() != "float32")
      throw LoadError(LoadError::Kind::Schema, path.string() + ": unsupported dtype");
    sh = side.at("shape").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw LoadError(LoadError::Kind::Schema, sidecar_path(path).string() + ": " + e.what());
  }
  for (int d : sh)
    if (d < 0) throw LoadError(LoadError::Kind::Schema, sidecar_path(path).string() + ": negative dimension");
  const std::string bytes = read_file(path);
  const std::size_t n = Tensor<float>::count(sh);
  if (bytes.size() != n * 4)
    throw LoadError(LoadError::Kind::Schema, path.string() + ": size does not match shape " + shape_str(sh));
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t u;
    std::memcpy(&u, bytes.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
    out[i] = std::bit_cast<float>(u);
  }
  if (shape != nullptr) *shape = std::move(sh);
  return out;
}

// --------------------------------------------------------------- manifest

namespace {

json segment_json(const Segment& s) { return json{{"start", s.start}, {"end", s.end}}; }

std::string payload_name(Payload p) { return p == Payload::Frames ? "frames" : "features"; }

Payload parse_payload(const std::string& s) {
  if (s == "frames") return Payload::Frames;
  if (s == "features") return Payload::Features;
  throw LoadError(LoadError::Kind::Schema, "unknown payload '" + s + "'");
}

SampleRecord record_for(const VideoSample& s, const std::string& tensor) {
  SampleRecord r;
  r.id = s.id;
  r.duration = s.duration;
  r.fps = s.fps;
  r.tensor = tensor;
  r.payload = s.payload;
  r.annotations = s.annotations;
  r.queries = s.queries;
  r.saliency = s.saliency;
  r.saliency_step = s.saliency_step;
  return r;
}

}  // namespace

bool Manifest::operator==(const Manifest& o) const {
  return version == o.version && task == o.task && classes == o.classes && vocabulary == o.vocabulary &&
         generator == o.generator && samples == o.samples;
}

json manifest_to_json(const Manifest& m) {
  json samples = json::array();
  for (const SampleRecord& r : m.samples) {
    json anns = json::array();
    for (const Annotation& a : r.annotations) {
      json j = segment_json(a.segment);
      if (a.label) j["label"] = *a.label;
      anns.push_back(j);
    }
    json qs = json::array();
    for (const QueryAnnotation& q : r.queries)
      qs.push_back(json{{"tokens", q.tokens}, {"text", q.text}, {"start", q.target.start}, {"end", q.target.end}});
    json rec{{"id", r.id},          {"duration", r.duration}, {"fps", r.fps}, {"tensor", r.tensor},
             {"payload", payload_name(r.payload)}, {"annotations", anns}, {"queries", qs}};
    if (!r.saliency.empty()) {
      rec["saliency"] = r.saliency;
      rec["saliency_step"] = r.saliency_step;
    }
    samples.push_back(rec);
  }
  return json{{"version", m.version},       {"task", task_name(m.task)}, {"classes", m.classes},
              {"vocabulary", m.vocabulary}, {"generator", m.generator},  {"samples", samples}};
}

void save_manifest(const Manifest& m, const fs::path& path) { write_json(path, manifest_to_json(m)); }

Manifest load_manifest(const fs::path& path) {
  const json j = read_json(path);
  Manifest m;
  m.root = path.parent_path();
  auto schema = [&](const std::string& what) {
    return LoadError(LoadError::Kind::Schema, path.string() + ": " + what);
  };
  try {
    if (!j.is_object()) throw schema("manifest is not an object");
    m.version = j.at("version").get<std::string>();
    if (m.version != kManifestVersion)
      throw LoadError(LoadError::Kind::VersionMismatch,
                      path.string() + ": manifest version " + m.version + ", expected " + kManifestVersion);
    try {
      m.task = parse_task(j.at("task").get<std::string>());
    } catch (const ConfigError& e) {
      throw schema(e.what());
    }
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    m.generator = j.value("generator", json());
    std::set<std::string> ids;
    for (const json& s : j.at("samples")) {
      SampleRecord r;
      r.id = s.at("id").get<std::string>();
      if (!ids.insert(r.id).second) throw schema("duplicate sample id '" + r.id + "'");
      r.duration = s.at("duration").get<double>();
      r.fps = s.at("fps").get<double>();
      r.tensor = s.at("tensor").get<std::string>();
      r.payload = parse_payload(s.value("payload", std::string("frames")));
      for (const json& a : s.at("annotations")) {
        Annotation an{{a.at("start").get<double>(), a.at("end").get<double>()}, std::nullopt};
        if (a.contains("label")) an.label = a.at("label").get<int>();
        if (!an.segment.valid() || an.segment.end > r.duration)
          throw schema("sample '" + r.id + "' has an annotation outside [0, duration]");
        r.annotations.push_back(an);
      }
      for (const json& q : s.at("queries")) {
        QueryAnnotation qa;
        qa.tokens = q.at("tokens").get<std::vector<int>>();
        qa.text = q.at("text").get<std::string>();
        qa.target = {q.at("start").get<double>(), q.at("end").get<double>()};
        if (qa.tokens.empty()) throw schema("sample '" + r.id + "' has an empty query");
        if (!qa.target.valid() || qa.target.end > r.duration)
          throw schema("sample '" + r.id + "' has a query target outside [0, duration]");
        r.queries.push_back(qa);
      }
      if (s.contains("saliency")) {
        r.saliency = s.at("saliency").get<std::vector<double>>();
        r.saliency_step = s.at("saliency_step").get<double>();
      }
      if (!(r.fps > 0.0) || !(r.duration >= 0.0)) throw schema("sample '" + r.id + "' has bad fps or duration");
      m.samples.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw schema(e.what());
  }
  for (const SampleRecord& r : m.samples)
    if (!fs::exists(m.root / r.tensor))
      throw LoadError(LoadError::Kind::MissingFile,
                      "sample '" + r.id + "': tensor file " + (m.root / r.tensor).string() + " not found");
  return m;
}

Manifest write_samples(const std::vector<VideoSample>& samples, TaskKind task, const std::vector<std::string>& classes,
                       const json& generator, const fs::path& dir) {
  fs::create_directories(dir);
  Manifest m;
  m.task = task;
  m.classes = classes;
  m.vocabulary = Vocabulary::tokens();
  m.generator = generator;
  m.root = dir;
  for (const VideoSample& s : samples) {
    const std::string file = s.id + ".f32";
    std::vector<int> shape{s.units};
    shape.insert(shape.end(), s.unit_shape.begin(), s.unit_shape.end());
    write_tensor_f32(dir / file, shape, s.data);
    m.samples.push_back(record_for(s, file));
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

Manifest generate_dataset(const GenSpec& g, std::uint64_t seed, const fs::path& dir) {
  const std::vector<VideoSample> samples = generate_samples(g, seed);
  std::vector<std::string> classes;
  if (g.task == TaskKind::TAL)
    classes.assign(Vocabulary::colors().begin(), Vocabulary::colors().begin() + g.num_classes);
  json gen = g.to_json();
  gen["seed"] = seed;
  return write_samples(samples, g.task, classes, gen, dir);
}

VideoSample load_sample(const Manifest& m, std::size_t index) {
  const SampleRecord& r = m.samples.at(index);
  std::vector<int> shape;
  VideoSample s;
  s.data = read_tensor_f32(m.root / r.tensor, &shape);
  if (shape.empty()) throw LoadError(LoadError::Kind::Schema, "sample '" + r.id + "': scalar tensor");
  s.id = r.id;
  s.fps = r.fps;
  s.duration = r.duration;
  s.payload = r.payload;
  s.units = s.valid_units = shape[0];
  s.unit_shape.assign(shape.begin() + 1, shape.end());
  s.annotations = r.annotations;
  s.queries = r.queries;
  s.saliency = r.saliency;
  s.saliency_step = r.saliency_step;
  try {
    s.validate();
  } catch (const InvalidInput& e) {
    throw LoadError(LoadError::Kind::Schema, e.what());
  }
  return s;
}

std::vector<VideoSample> load_samples(const Manifest& m) {
  std::vector<VideoSample> out;
  out.reserve(m.samples.size());
  for (std::size_t i = 0; i < m.samples.size(); ++i) out.push_back(load_sample(m, i));
  return out;
}

// ---------------------------------------------------------------- windows

int strided_units(const VideoSample& s, int stride) {
  if (stride < 1) throw InvalidInput("stride must be >= 1");
  return ceil_div(s.valid_units, stride);
}

VideoSample crop_window(const VideoSample& s, int window, int stride, int offset) {
  if (window < 1) throw InvalidInput("window must be >= 1");
  const int total = strided_units(s, stride);
  if (offset < 0 || (offset >= total && total > 0)) throw InvalidInput("window offset beyond the video");
  const std::size_t us = s.unit_size();
  VideoSample w;
  w.id = s.id;
  w.payload = s.payload;
  w.unit_shape = s.unit_shape;
  w.fps = s.fps / stride;
  w.units = window;
  w.valid_units = std::min(window, total - offset);
  w.data.assign(us * static_cast<std::size_t>(window), 0.0f);
  for (int k = 0; k < w.valid_units; ++k) {
    const float* src = s.unit((offset + k) * stride);
    std::copy(src, src + us, w.data.begin() + static_cast<std::ptrdiff_t>(us * k));
  }
  const double start = offset * stride / s.fps;
  w.time_offset = s.time_offset + start;
  w.duration = std::max(0.0, std::min(w.valid_units * stride / s.fps, s.duration - start));

  auto keep = [&](const Segment& seg, Segment* out) {
    const double c = seg.center() - start;
    if (c < 0.0 || c >= w.duration) return false;
    *out = clip_segment(Segment{std::max(0.0, seg.start - start), std::max(0.0, seg.end - start)}, w.duration);
    return true;
  };
  for (const Annotation& a : s.annotations) {
    Annotation b = a;
    if (keep(a.segment, &b.segment)) w.annotations.push_back(b);
  }
  for (const QueryAnnotation& q : s.queries) {
    QueryAnnotation b = q;
    if (keep(q.target, &b.target)) w.queries.push_back(b);
  }
  if (!s.saliency.empty()) {
    w.saliency_step = s.saliency_step;
    for (std::size_t i = 0; i < s.saliency.size(); ++i) {
      const double c = (static_cast<double>(i) + 0.5) * s.saliency_step - start;
      if (c >= 0.0 && c < w.duration) w.saliency.push_back(s.saliency[i]);
    }
  }
  return w;
}

VideoSample sample_window(const VideoSample& s, int window, int stride, Rng& rng) {
  if (window < 1) throw InvalidInput("window must be >= 1");
  const int total = strided_units(s, stride);
  const int hi = std::max(0, total - window);
  return crop_window(s, window, stride, static_cast<int>(rng.uniform_int(0, hi)));
}

std::vector<VideoSample> tile_windows(const VideoSample& s, int window, int stride, int hop) {
  if (window < 1 || hop < 1) throw InvalidInput("window and hop must be >= 1");
  const int total = strided_units(s, stride);
  std::vector<VideoSample> out;
  int o = 0;
  while (true) {
    out.push_back(crop_window(s, window, stride, o));
    if (o + window >= total) break;
    o = std::min(o + hop, total - window);
  }
  return out;
}

}  // namespace segloc
