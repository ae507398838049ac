// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace segloc::cli {

/// Everything a command reads. A JSON config file holds the same keys;
/// command-line flags override it. See README for the schema.
struct RunConfig {
  std::string task;  // empty: gen-data uses tvg, other commands the manifest's task
  std::uint64_t seed = 0;
  std::string precision = "double";  // "double" | "single"
  std::filesystem::path out = "out";

  std::filesystem::path manifest;    // train, eval, predict
  std::filesystem::path checkpoint;  // eval, predict
  std::filesystem::path resume;      // train: continue from a saved state
  std::string stage = "all";         // train: "all" | "1" | "2"

  nlohmann::json generator = nlohmann::json::object();  // GenSpec fields
  nlohmann::json model = nlohmann::json::object();      // ModelConfig fields
  nlohmann::json options = nlohmann::json::object();    // TrainOptions fields
  nlohmann::json stages;                                // optional full StageConfig list

  double base_lr = 1e-3;
  double video_ratio = 1.0;
  std::vector<int> epochs;  // per stage of the schedule; empty keeps 1
  int batch = 2;

  int frames = 1024;                     // profile-chunks
  std::vector<int> chunks{1, 2, 4, 8};   // profile-chunks
  int repeats = 3;                       // profile-chunks, 0 skips timing
  std::vector<std::filesystem::path> inputs;  // plot

  nlohmann::json to_json() const;
  /// Throws ConfigError on unknown keys or wrong types.
  static RunConfig from_json(const nlohmann::json& j);
};

void gen_data(const RunConfig& c, std::ostream& log);
void train(const RunConfig& c, std::ostream& log);
nlohmann::json eval(const RunConfig& c, std::ostream& log);
nlohmann::json predict(const RunConfig& c, std::ostream& log);
nlohmann::json profile_chunks(const RunConfig& c, std::ostream& log);
void plot(const RunConfig& c, std::ostream& log);

/// Fixed-width table of a metric report: one column per threshold plus the
/// average.
std::string report_table(const nlohmann::json& report);

/// Entry point. Returns the process exit code; diagnostics go to `err` as a
/// single line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace segloc::cli
