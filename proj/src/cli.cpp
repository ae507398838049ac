// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "segloc/chunking.hpp"
#include "segloc/data.hpp"
#include "segloc/error.hpp"
#include "segloc/io.hpp"
#include "segloc/model.hpp"
#include "segloc/tasks.hpp"
#include "segloc/trainer.hpp"

namespace segloc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json RunConfig::to_json() const {
  std::vector<std::string> in;
  for (const fs::path& p : inputs) in.push_back(p.string());
  return json{{"task", task},
              {"seed", seed},
              {"precision", precision},
              {"out", out.string()},
              {"manifest", manifest.string()},
              {"checkpoint", checkpoint.string()},
              {"resume", resume.string()},
              {"stage", stage},
              {"generator", generator},
              {"model", model},
              {"options", options},
              {"stages", stages},
              {"base_lr", base_lr},
              {"video_ratio", video_ratio},
              {"epochs", epochs},
              {"batch", batch},
              {"frames", frames},
              {"chunks", chunks},
              {"repeats", repeats},
              {"inputs", in}};
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  const json def = c.to_json();
  for (const auto& item : j.items())
    if (!def.contains(item.key())) throw ConfigError("unknown config field '" + item.key() + "'");
  try {
    auto get = [&](const char* k, auto& dst) {
      if (j.contains(k)) dst = j.at(k).get<std::decay_t<decltype(dst)>>();
    };
    auto path = [&](const char* k, fs::path& dst) {
      if (j.contains(k)) dst = j.at(k).get<std::string>();
    };
    get("task", c.task);
    get("seed", c.seed);
    get("precision", c.precision);
    path("out", c.out);
    path("manifest", c.manifest);
    path("checkpoint", c.checkpoint);
    path("resume", c.resume);
    get("stage", c.stage);
    get("generator", c.generator);
    get("model", c.model);
    get("options", c.options);
    get("stages", c.stages);
    get("base_lr", c.base_lr);
    get("video_ratio", c.video_ratio);
    get("epochs", c.epochs);
    get("batch", c.batch);
    get("frames", c.frames);
    get("chunks", c.chunks);
    get("repeats", c.repeats);
    if (j.contains("inputs"))
      for (const auto& s : j.at("inputs").get<std::vector<std::string>>()) c.inputs.emplace_back(s);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

namespace {

bool is_double(const RunConfig& c) {
  if (c.precision == "double") return true;
  if (c.precision == "single") return false;
  throw ConfigError("precision must be 'double' or 'single', got '" + c.precision + "'");
}

void require(const fs::path& p, const char* field) {
  if (p.empty()) throw ConfigError(std::string("missing required field '") + field + "'");
}

struct Dataset {
  Manifest manifest;
  std::vector<VideoSample> samples;
  TaskSpec spec;
};

Dataset open_dataset(const RunConfig& c) {
  require(c.manifest, "manifest");
  Dataset d;
  d.manifest = load_manifest(c.manifest);
  if (!c.task.empty() && parse_task(c.task) != d.manifest.task)
    throw ConfigError("task '" + c.task + "' does not match the manifest's '" + task_name(d.manifest.task) + "'");
  d.samples = load_samples(d.manifest);
  d.spec = make_task_spec(d.manifest.task, d.manifest.task == TaskKind::TAL
                                               ? static_cast<int>(d.manifest.classes.size())
                                               : 0);
  return d;
}

std::vector<StageConfig> build_schedule(const RunConfig& c, const TaskSpec& spec) {
  std::vector<StageConfig> s;
  if (!c.stages.is_null()) {
    if (!c.stages.is_array() || c.stages.empty()) throw ConfigError("stages must be a non-empty array");
    for (const json& j : c.stages) s.push_back(StageConfig::from_json(j));
    return s;
  }
  s = make_schedule(spec, c.base_lr, c.video_ratio);
  if (c.epochs.size() > s.size())
    throw ConfigError("epochs lists " + std::to_string(c.epochs.size()) + " stages, the schedule has " +
                      std::to_string(s.size()));
  if (c.batch < 1) throw ConfigError("batch must be >= 1");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i < c.epochs.size()) s[i].epochs = c.epochs[i];
    s[i].batch = c.batch;
    s[i].seed = c.seed + 1 + i;
  }
  return s;
}

template <class T>
void train_impl(const RunConfig& c, std::ostream& log) {
  const Dataset d = open_dataset(c);
  const TrainOptions base_opt = TrainOptions::from_json(c.options);
  std::vector<StageConfig> sched = build_schedule(c, d.spec);

  std::vector<StageConfig> run;
  if (c.stage == "all") {
    run = sched;
  } else if (c.stage == "1" || c.stage == "2") {
    const std::size_t k = c.stage == "1" ? 0 : 1;
    if (k >= sched.size()) throw ConfigError("stage " + c.stage + " does not exist for task " + task_name(d.spec.kind));
    run.push_back(sched[k]);
  } else {
    throw ConfigError("stage must be 'all', '1' or '2', got '" + c.stage + "'");
  }

  fs::create_directories(c.out);
  TrainOptions opt = base_opt;
  opt.log_path = c.out / "train_log.jsonl";
  TrainState<T> state;
  if (!c.resume.empty()) {
    state = load_state<T>(c.resume);
  } else {
    fs::remove(opt.log_path);
    const ModelConfig mc = config_for_task(ModelConfig::from_json(c.model), d.spec);
    state = TrainState<T>::fresh(init_params<T>(mc, c.seed));
  }
  if (config_for_task(state.params.config, d.spec) != state.params.config)
    throw ConfigError("model does not fit task " + task_name(d.spec.kind));

  for (const StageConfig& s : run) {
    log << "stage " << s.name << ": " << s.epochs << " epochs over " << d.samples.size() << " videos\n";
    train_stage(state, s, d.samples, d.spec, opt);
    save_state(c.out / "state.ckpt", state);
    if (!state.history.empty()) log << "  final loss " << state.history.back().at("loss").template get<double>() << "\n";
  }
  save_checkpoint(c.out / "model.ckpt", state.params,
                  json{{"task", task_name(d.spec.kind)}, {"classes", d.manifest.classes}});
  io::write_json(c.out / "history.json", state.history);
  io::write_json(c.out / "config.json", c.to_json());
  log << "wrote " << (c.out / "model.ckpt").string() << "\n";
}

template <class T>
std::vector<VideoOutput> infer_impl(const RunConfig& c, const Dataset& d, TrainOptions* opt) {
  require(c.checkpoint, "checkpoint");
  json extra;
  const ModelParams<T> p = load_checkpoint<T>(c.checkpoint, &extra);
  if (extra.contains("task") && extra.at("task") != task_name(d.spec.kind))
    throw ConfigError("checkpoint was trained for task '" + extra.at("task").get<std::string>() + "', dataset is '" +
                      task_name(d.spec.kind) + "'");
  *opt = TrainOptions::from_json(c.options);
  return infer(p, d.samples, d.spec, *opt);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- SVG charts -----------------------------------------------------------

struct Series {
  std::string name;
  std::vector<double> x, y;
};

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string svg_escape(const std::string& s) {
  std::string o;
  for (char ch : s) {
    if (ch == '<') o += "&lt;";
    else if (ch == '>') o += "&gt;";
    else if (ch == '&') o += "&amp;";
    else o += ch;
  }
  return o;
}

std::string line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series) {
  double x0 = 1e300, x1 = -1e300, y0 = 0.0, y1 = -1e300;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const double W = 640, H = 400, L = 70, R = 150, Tp = 40, B = 50;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - Tp - B); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" "
       "font-size=\"12\">\n";
  o << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  o << "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << svg_escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << Tp << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << fmt("%.1f", px(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
      << fmt("%.3g", xv) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << fmt("%.1f", py(yv) + 4) << "\" text-anchor=\"end\">" << fmt("%.3g", yv)
      << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << svg_escape(xlabel)
    << "</text>\n";
  o << "<text x=\"16\" y=\"" << (Tp + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (Tp + H - B) / 2 << ")\">" << svg_escape(ylabel) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* col = kColors[k % 5];
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[k].x.size(); ++i)
      o << (i ? " " : "") << fmt("%.1f", px(series[k].x[i])) << "," << fmt("%.1f", py(series[k].y[i]));
    o << "\"/>\n";
    o << "<text x=\"" << W - R + 10 << "\" y=\"" << Tp + 16 * (k + 1) << "\" fill=\"" << col << "\">"
      << svg_escape(series[k].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string bar_chart(const std::string& title, const std::string& ylabel, const std::vector<std::string>& labels,
                      const std::vector<double>& values) {
  double top = 0.0;
  for (double v : values) top = std::max(top, v);
  if (!(top > 0.0)) top = 1.0;
  const double W = 640, H = 400, L = 90, R = 20, Tp = 40, B = 50;
  const double slot = (W - L - R) / static_cast<double>(std::max<std::size_t>(1, values.size()));
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" "
       "font-size=\"12\">\n";
  o << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  o << "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << svg_escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<text x=\"16\" y=\"" << (Tp + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (Tp + H - B) / 2 << ")\">" << svg_escape(ylabel) << "</text>\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = values[i] / top * (H - Tp - B);
    const double x = L + slot * static_cast<double>(i) + slot * 0.15;
    o << "<rect x=\"" << fmt("%.1f", x) << "\" y=\"" << fmt("%.1f", H - B - h) << "\" width=\""
      << fmt("%.1f", slot * 0.7) << "\" height=\"" << fmt("%.1f", h) << "\" fill=\"" << kColors[0] << "\"/>\n";
    o << "<text x=\"" << fmt("%.1f", x + slot * 0.35) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
      << svg_escape(labels[i]) << "</text>\n";
    o << "<text x=\"" << fmt("%.1f", x + slot * 0.35) << "\" y=\"" << fmt("%.1f", H - B - h - 4)
      << "\" text-anchor=\"middle\">" << fmt("%.3g", values[i]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string chart_for(const json& j, const std::string& name) {
  if (j.is_array()) {  // training history
    if (j.empty()) throw InvalidInput(name + ": empty training history");
    std::vector<Series> s{{"loss", {}, {}}, {"cls", {}, {}}, {"reg", {}, {}}};
    const bool sal = j.front().contains("sal");
    if (sal) s.push_back({"sal", {}, {}});
    for (std::size_t i = 0; i < j.size(); ++i)
      for (Series& ser : s) {
        ser.x.push_back(static_cast<double>(i + 1));
        ser.y.push_back(j[i].at(ser.name).get<double>());
      }
    return line_chart("Training loss", "epoch", "loss", s);
  }
  if (j.is_object() && j.contains("rows")) {  // chunking profile
    std::vector<std::string> labels;
    std::vector<double> peaks;
    for (const json& r : j.at("rows")) {
      labels.push_back(r.at("checkpoint").get<bool>() ? "t=" + std::to_string(r.at("t").get<int>()) : "none");
      peaks.push_back(r.at("peak_live_scalars").get<double>());
    }
    return bar_chart("Peak live activations vs chunks", "scalars", labels, peaks);
  }
  if (j.is_object() && j.contains("thresholds") && j.contains("task")) {  // metric report
    const std::vector<double> x = j.at("thresholds").get<std::vector<double>>();
    std::vector<Series> s;
    for (const char* k : {"map", "f1", "recall_at_1", "recall_at_5"})
      if (j.contains(k)) s.push_back({k, x, j.at(k).get<std::vector<double>>()});
    const bool gebd = j.contains("f1");
    return line_chart("Metric vs threshold (" + j.at("task").get<std::string>() + ")",
                      gebd ? "Rel.Dis. threshold" : "tIoU threshold", "score", s);
  }
  throw InvalidInput(name + ": not a report, history or profile file");
}

}  // namespace

void gen_data(const RunConfig& c, std::ostream& log) {
  json g = c.generator;
  if (!g.is_object()) throw ConfigError("generator must be a JSON object");
  g["task"] = c.task.empty() ? std::string("tvg") : c.task;
  const GenSpec spec = GenSpec::from_json(g);
  const Manifest m = generate_dataset(spec, c.seed, c.out);
  log << "wrote " << m.samples.size() << " videos to " << (c.out / "manifest.json").string() << "\n";
}

void train(const RunConfig& c, std::ostream& log) {
  if (is_double(c)) train_impl<double>(c, log);
  else train_impl<float>(c, log);
}

json eval(const RunConfig& c, std::ostream& log) {
  const Dataset d = open_dataset(c);
  TrainOptions opt;
  const std::vector<VideoOutput> outs = is_double(c) ? infer_impl<double>(c, d, &opt) : infer_impl<float>(c, d, &opt);
  const json report = metric_report(outs, d.samples, d.spec, opt.instance_norm);
  const std::string table = report_table(report);
  fs::create_directories(c.out);
  io::write_json(c.out / "report.json", report);
  io::write_file_atomic(c.out / "report.txt", table);
  log << table;
  return report;
}

json predict(const RunConfig& c, std::ostream& log) {
  const Dataset d = open_dataset(c);
  TrainOptions opt;
  const std::vector<VideoOutput> outs = is_double(c) ? infer_impl<double>(c, d, &opt) : infer_impl<float>(c, d, &opt);
  const json p = predictions_json(outs, d.spec);
  fs::create_directories(c.out);
  io::write_json(c.out / "predictions.json", p);
  log << "wrote predictions for " << outs.size() << " videos to " << (c.out / "predictions.json").string() << "\n";
  return p;
}

json profile_chunks(const RunConfig& c, std::ostream& log) {
  ModelConfig mc = ModelConfig::from_json(c.model);
  if (c.frames < 1) throw ConfigError("frames must be >= 1");
  if (c.repeats < 0) throw ConfigError("repeats must be >= 0");
  if (c.chunks.empty()) throw ConfigError("chunks must list at least one t");
  const int unit = mc.feature_dim > 0 ? 1 : mc.clip_len;
  const VideoSample s = profile_sample(mc, c.frames, c.seed);
  const ModelParams<double> pd = is_double(c) ? init_params<double>(mc, c.seed) : ModelParams<double>{};
  const ModelParams<float> pf = is_double(c) ? ModelParams<float>{} : init_params<float>(mc, c.seed);
  auto timed = [&](const ChunkPlan& plan, bool ckpt) -> json {
    if (c.repeats == 0) return nullptr;
    return is_double(c) ? time_encoder_pass(pd, s, plan, ckpt, c.repeats)
                        : time_encoder_pass(pf, s, plan, ckpt, c.repeats);
  };

  json rows = json::array();
  const ChunkPlan base_plan = plan_chunks(c.frames, 1, unit);
  json base = activation_report(base_plan, mc, false).to_json();
  base["seconds"] = timed(base_plan, false);
  base["overhead"] = c.repeats == 0 ? json(nullptr) : json(1.0);
  rows.push_back(base);
  std::ostringstream csv;
  csv << "t,checkpoint,clips,per_clip_scalars,peak_live_scalars,total_recomputed_scalars,forward_passes,seconds,"
         "overhead\n";
  for (int t : c.chunks) {
    const ChunkPlan plan = plan_chunks(c.frames, t, unit);
    json r = activation_report(plan, mc, true).to_json();
    r["seconds"] = timed(plan, true);
    r["overhead"] = r["seconds"].is_null() ? json(nullptr)
                                           : json(r["seconds"].get<double>() / base["seconds"].get<double>());
    rows.push_back(r);
  }
  for (const json& r : rows) {
    csv << r.at("t").get<int>() << "," << (r.at("checkpoint").get<bool>() ? "on" : "off") << ","
        << r.at("clips").get<int>() << "," << r.at("per_clip_scalars").get<std::size_t>() << ","
        << r.at("peak_live_scalars").get<std::size_t>() << "," << r.at("total_recomputed_scalars").get<std::size_t>()
        << "," << r.at("forward_passes").get<int>() << ","
        << (r.at("seconds").is_null() ? std::string() : fmt("%.6f", r.at("seconds").get<double>())) << ","
        << (r.at("overhead").is_null() ? std::string() : fmt("%.4f", r.at("overhead").get<double>())) << "\n";
  }
  const json out{{"frames", c.frames}, {"model", mc.to_json()}, {"precision", c.precision}, {"rows", rows}};
  fs::create_directories(c.out);
  io::write_json(c.out / "profile.json", out);
  io::write_file_atomic(c.out / "profile.csv", csv.str());
  log << csv.str();
  return out;
}

void plot(const RunConfig& c, std::ostream& log) {
  if (c.inputs.empty()) throw ConfigError("plot needs at least one input file");
  fs::create_directories(c.out);
  for (const fs::path& in : c.inputs) {
    const std::string svg = chart_for(io::read_json(in), in.string());
    const fs::path dst = c.out / (in.stem().string() + ".svg");
    io::write_file_atomic(dst, svg);
    log << "wrote " << dst.string() << "\n";
  }
}

std::string report_table(const json& r) {
  const std::vector<double> thr = r.at("thresholds").get<std::vector<double>>();
  std::ostringstream o;
  auto header = [&](const std::string& name, bool avg) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%-10s", name.c_str());
    o << buf;
    for (double t : thr) o << fmt("%8.2f", t);
    if (avg) o << "     Avg";
    o << "\n";
  };
  auto row = [&](const std::string& name, const std::vector<double>& v, double avg, bool with_avg) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%-10s", name.c_str());
    o << buf;
    for (double x : v) o << fmt("%8.2f", 100.0 * x);
    if (with_avg) o << fmt("%8.2f", 100.0 * avg);
    o << "\n";
  };
  const std::string task = r.at("task").get<std::string>();
  if (r.contains("map")) {
    header("tIoU", true);
    row("mAP(%)", r.at("map").get<std::vector<double>>(), r.at("average_map").get<double>(), true);
  } else if (r.contains("recall_at_1")) {
    header("tIoU", false);
    row("R1(%)", r.at("recall_at_1").get<std::vector<double>>(), 0.0, false);
    row("R5(%)", r.at("recall_at_5").get<std::vector<double>>(), 0.0, false);
    if (r.contains("sweep")) o << "mAP(%) averaged over tIoU 0.50:0.05:0.95: "
                               << fmt("%.2f", 100.0 * r.at("sweep").at("average_map").get<double>()) << "\n";
  } else if (r.contains("f1")) {
    header("Rel.Dis.", true);
    row("F1(%)", r.at("f1").get<std::vector<double>>(), r.at("average_f1").get<double>(), true);
  } else {
    throw InvalidInput("report_table: unrecognized report for task " + task);
  }
  return o.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal segment localization: data, training, evaluation and profiling", "segloc"};
  app.require_subcommand(1, 1);

  std::string config, task, precision, outdir, manifest, checkpoint, resume, stage;
  std::uint64_t seed = 0;
  int videos = 0, batch = 0, frames = 0, repeats = 0;
  double lr = 0.0;
  std::vector<int> epochs, chunks;
  std::vector<std::string> inputs;

  std::map<std::string, std::vector<CLI::Option*>> opts;
  auto common = [&](CLI::App* sub) {
    auto& v = opts[sub->get_name()];
    v.push_back(sub->add_option("--config", config, "JSON config file; flags override it")->check(CLI::ExistingFile));
    v.push_back(sub->add_option("--seed", seed, "Seed for all randomness"));
    v.push_back(sub->add_option("--out", outdir, "Output directory"));
    v.push_back(sub->add_option("--task", task, "tal, tvg, mr or gebd"));
    v.push_back(sub->add_option("--precision", precision, "double or single"));
  };
  auto data_opts = [&](CLI::App* sub) {
    opts[sub->get_name()].push_back(sub->add_option("--manifest", manifest, "Dataset manifest.json"));
  };

  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  common(gen);
  opts["gen-data"].push_back(gen->add_option("--videos", videos, "Number of videos"));

  CLI::App* tr = app.add_subcommand("train", "Train a model with the staged schedule");
  common(tr);
  data_opts(tr);
  opts["train"].push_back(tr->add_option("--stage", stage, "all, 1 or 2"));
  opts["train"].push_back(tr->add_option("--resume", resume, "Training state to continue from"));
  opts["train"].push_back(tr->add_option("--epochs", epochs, "Epochs per stage")->delimiter(','));
  opts["train"].push_back(tr->add_option("--batch", batch, "Videos per step"));
  opts["train"].push_back(tr->add_option("--lr", lr, "Base learning rate"));

  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  common(ev);
  data_opts(ev);
  opts["eval"].push_back(ev->add_option("--checkpoint", checkpoint, "Model checkpoint"));

  CLI::App* pr = app.add_subcommand("predict", "Export predictions of a checkpoint");
  common(pr);
  data_opts(pr);
  opts["predict"].push_back(pr->add_option("--checkpoint", checkpoint, "Model checkpoint"));

  CLI::App* pc = app.add_subcommand("profile-chunks", "Activation accounting and timing of chunked encoding");
  common(pc);
  opts["profile-chunks"].push_back(pc->add_option("--frames", frames, "Input length in frames"));
  opts["profile-chunks"].push_back(pc->add_option("--t", chunks, "Chunk counts")->delimiter(','));
  opts["profile-chunks"].push_back(pc->add_option("--repeats", repeats, "Timed repetitions, 0 skips timing"));

  CLI::App* pl = app.add_subcommand("plot", "Render reports, histories and profiles as SVG");
  common(pl);
  opts["plot"].push_back(pl->add_option("inputs", inputs, "JSON files to plot"));

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "segloc: " << e.what() << " (see --help)\n";
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    RunConfig c;
    if (!config.empty()) c = RunConfig::from_json(io::read_json(config));
    for (CLI::Option* o : opts[sub->get_name()]) {
      if (o->count() == 0) continue;
      const std::string n = o->get_name();
      if (n == "--seed") c.seed = seed;
      else if (n == "--out") c.out = outdir;
      else if (n == "--task") c.task = task;
      else if (n == "--precision") c.precision = precision;
      else if (n == "--manifest") c.manifest = manifest;
      else if (n == "--checkpoint") c.checkpoint = checkpoint;
      else if (n == "--resume") c.resume = resume;
      else if (n == "--stage") c.stage = stage;
      else if (n == "--videos") c.generator["videos"] = videos;
      else if (n == "--epochs") c.epochs = epochs;
      else if (n == "--batch") c.batch = batch;
      else if (n == "--lr") c.base_lr = lr;
      else if (n == "--frames") c.frames = frames;
      else if (n == "--t") c.chunks = chunks;
      else if (n == "--repeats") c.repeats = repeats;
      else if (n == "inputs") c.inputs.assign(inputs.begin(), inputs.end());
    }
    is_double(c);
    if (!c.task.empty()) parse_task(c.task);
    const std::string name = sub->get_name();
    if (name == "gen-data") gen_data(c, out);
    else if (name == "train") train(c, out);
    else if (name == "eval") eval(c, out);
    else if (name == "predict") predict(c, out);
    else if (name == "profile-chunks") profile_chunks(c, out);
    else plot(c, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "segloc " << sub->get_name() << ": " << msg << "\n";
    return 1;
  }
  return 0;
}

}  // namespace segloc::cli
