// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "prefopt/judge.hpp"

namespace prefopt {

/// 64-bit FNV-1a. Stable across platforms and runs, so it can key the
/// on-disk cache.
std::uint64_t stable_hash(std::string_view bytes) noexcept;

/// Memoizing judge. Keys are (judge id, prompt, baseline text, candidate
/// text); order is part of the key. With a cache file, entries are loaded at
/// construction and every new entry is appended as a JSONL row
/// {"key", "verdict", "raw"}. Unreadable rows are logged and ignored.
///
/// Concurrent lookups of the same missing key run the inner judge once; the
/// other callers wait for that result.
class CachedJudge final : public Judge {
 public:
  explicit CachedJudge(std::shared_ptr<Judge> inner,
                       std::optional<std::filesystem::path> cache_file = std::nullopt);
  ~CachedJudge() override;

  std::string id() const override;
  ComparisonOutcome compare(const CompareRequest& req) override;

  std::size_t hits() const noexcept;
  std::size_t misses() const noexcept;
  std::size_t size() const;
  /// Rows skipped while loading the cache file.
  std::size_t corrupt_rows() const noexcept;

  static std::string make_key(std::string_view judge_id, const CompareRequest& req);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace prefopt
