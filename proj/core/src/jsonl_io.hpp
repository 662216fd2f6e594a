// SPDX-License-Identifier: Apache-2.0
//
// Internal line-oriented file helpers shared by the readers and writers.
#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "prefopt/error.hpp"

namespace prefopt::detail {

using json = nlohmann::json;

/// Calls fn(line, line_number) for every non-blank line. Exceptions thrown
/// by fn are rewrapped as DataError("<path>:<line>: <what>").
inline void for_each_line(const std::filesystem::path& path,
                          const std::function<void(std::string_view, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      fn(line, lineno);
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
}

/// Writes `body` to `path`, replacing any existing file.
inline void write_text(const std::filesystem::path& path, std::string_view body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

inline json parse_object(std::string_view line) {
  json j = json::parse(line);
  if (!j.is_object()) throw DataError("expected a JSON object");
  return j;
}

inline const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("missing field \"") + key + "\"");
  return *it;
}

inline std::string require_string(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_string()) throw DataError(std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

inline std::size_t require_index(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw DataError(std::string("field \"") + key + "\" must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace prefopt::detail
