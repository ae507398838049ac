// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace segloc {

enum class Dtype { Float32, Float64 };

std::string dtype_name(Dtype d);
Dtype parse_dtype(const std::string& s);

/// One entry of a named-array archive. Values are carried as doubles in
/// memory; the on-disk dtype decides the stored width.
struct NamedArray {
  std::string name;
  std::string group;
  std::vector<int> shape;
  std::vector<double> data;
};

/// Named-array archive:
///
///   bytes 0..7   magic "SEGLOCAR"
///   u32 (LE)     archive format version (1)
///   u64 (LE)     header length H
///   H bytes      UTF-8 JSON header
///   payload      concatenated little-endian array data
///
/// The header holds {"format", "version", "dtype", "meta", "groups":
/// {group: [names]}, "arrays": [{name, group, shape, dtype, offset,
/// nbytes}]}, offsets relative to the payload start.
struct Archive {
  Dtype dtype = Dtype::Float64;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

inline constexpr std::uint32_t kArchiveVersion = 1;

void write_archive(const std::filesystem::path& path, const Archive& archive);

/// Throws LoadError on a missing, truncated or malformed file.
Archive read_archive(const std::filesystem::path& path);

}  // namespace segloc
