// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace segloc::io {

using json = nlohmann::json;

/// Writes via a sibling temp file and rename, so readers never observe a
/// partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Pretty JSON with a trailing newline; key order is nlohmann's sorted order,
/// so equal documents serialize to identical bytes.
std::string dump_json(const json& j);

void write_json(const std::filesystem::path& path, const json& j);

/// Parses a JSON file; throws LoadError (MissingFile or Schema).
json read_json(const std::filesystem::path& path);

}  // namespace segloc::io
