// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/archive.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "segloc/error.hpp"
#include "segloc/io.hpp"

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace segloc {
namespace {

constexpr char kMagic[8] = {'S', 'E', 'G', 'L', 'O', 'C', 'A', 'R'};

template <class U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

template <class U>
U get(const std::string& in, std::size_t off) {
  U v;
  std::memcpy(&v, in.data() + off, sizeof(U));
  return v;
}

LoadError schema(const std::filesystem::path& p, const std::string& what) {
  return LoadError(LoadError::Kind::Schema, "invalid archive " + p.string() + ": " + what);
}

}  // namespace

std::string dtype_name(Dtype d) { return d == Dtype::Float32 ? "float32" : "float64"; }

Dtype parse_dtype(const std::string& s) {
  if (s == "float32") return Dtype::Float32;
  if (s == "float64") return Dtype::Float64;
  throw InvalidInput("unknown dtype: " + s);
}

const NamedArray* Archive::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  nlohmann::json header;
  header["format"] = "segloc-archive";
  header["version"] = kArchiveVersion;
  header["dtype"] = dtype_name(archive.dtype);
  header["meta"] = archive.meta;
  nlohmann::json groups = nlohmann::json::object();
  nlohmann::json arrays = nlohmann::json::array();
  const std::size_t width = archive.dtype == Dtype::Float32 ? 4 : 8;
  std::string payload;
  for (const auto& a : archive.arrays) {
    std::size_t count = 1;
    for (int d : a.shape) count *= static_cast<std::size_t>(d);
    if (count != a.data.size()) throw InvalidInput("archive array " + a.name + " does not match its shape");
    groups[a.group].push_back(a.name);
    arrays.push_back({{"name", a.name},
                      {"group", a.group},
                      {"shape", a.shape},
                      {"dtype", dtype_name(archive.dtype)},
                      {"offset", payload.size()},
                      {"nbytes", count * width}});
    for (double v : a.data) {
      if (archive.dtype == Dtype::Float32) {
        put(payload, static_cast<float>(v));
      } else {
        put(payload, v);
      }
    }
  }
  header["groups"] = groups;
  header["arrays"] = arrays;
  const std::string h = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put(out, kArchiveVersion);
  put(out, static_cast<std::uint64_t>(h.size()));
  out += h;
  out += payload;
  io::write_file_atomic(path, out);
}

Archive read_archive(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  constexpr std::size_t prefix = sizeof(kMagic) + 4 + 8;
  if (bytes.size() < prefix || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw schema(path, "bad magic or truncated prefix");
  }
  const auto version = get<std::uint32_t>(bytes, sizeof(kMagic));
  if (version != kArchiveVersion) {
    throw LoadError(LoadError::Kind::VersionMismatch,
                    "archive " + path.string() + " has version " + std::to_string(version) + ", expected " +
                        std::to_string(kArchiveVersion));
  }
  const auto hlen = get<std::uint64_t>(bytes, sizeof(kMagic) + 4);
  if (hlen > bytes.size() - prefix) throw schema(path, "header length exceeds file size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(prefix, hlen));
  } catch (const nlohmann::json::parse_error& e) {
    throw schema(path, std::string("header is not JSON: ") + e.what());
  }
  const std::size_t base = prefix + hlen;
  Archive out;
  try {
    if (header.at("format") != "segloc-archive") throw schema(path, "unexpected format tag");
    out.dtype = parse_dtype(header.at("dtype").get<std::string>());
    out.meta = header.value("meta", nlohmann::json::object());
    for (const auto& a : header.at("arrays")) {
      NamedArray arr;
      arr.name = a.at("name").get<std::string>();
      arr.group = a.at("group").get<std::string>();
      arr.shape = a.at("shape").get<std::vector<int>>();
      const Dtype dt = parse_dtype(a.at("dtype").get<std::string>());
      const auto offset = a.at("offset").get<std::size_t>();
      const auto nbytes = a.at("nbytes").get<std::size_t>();
      std::size_t count = 1;
      for (int d : arr.shape) {
        if (d < 0) throw schema(path, "negative dimension in " + arr.name);
        count *= static_cast<std::size_t>(d);
      }
      const std::size_t width = dt == Dtype::Float32 ? 4 : 8;
      if (nbytes != count * width) throw schema(path, "byte count mismatch for " + arr.name);
      if (offset > bytes.size() - base || nbytes > bytes.size() - base - offset) {
        throw schema(path, "array " + arr.name + " runs past end of file (truncated?)");
      }
      arr.data.resize(count);
      const char* p = bytes.data() + base + offset;
      for (std::size_t i = 0; i < count; ++i) {
        if (dt == Dtype::Float32) {
          float f;
          std::memcpy(&f, p + i * 4, 4);
          arr.data[i] = f;
        } else {
          std::memcpy(&arr.data[i], p + i * 8, 8);
        }
      }
      out.arrays.push_back(std::move(arr));
    }
  } catch (const nlohmann::json::exception& e) {
    throw schema(path, std::string("header field error: ") + e.what());
  } catch (const InvalidInput& e) {
    throw schema(path, e.what());
  }
  return out;
}

}  // namespace segloc
