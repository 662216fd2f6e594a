// SPDX-License-Identifier: Apache-2.0
#include "prefopt/judge_cache.hpp"

#include <atomic>
#include <fstream>
#include <future>
#include <mutex>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <json.hpp>

#include "prefopt/error.hpp"

namespace prefopt {

using json = nlohmann::json;

std::uint64_t stable_hash(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string CachedJudge::make_key(std::string_view judge_id, const CompareRequest& req) {
  // The prompt id is hashed together with the prompt text: the simulated
  // judge answers by (prompt_id, index), so two prompts with equal text must
  // not share entries.
  std::string prompt_material;
  prompt_material.reserve(req.prompt_id.size() + 1 + req.prompt.size());
  prompt_material.append(req.prompt_id).push_back('\x1f');
  prompt_material.append(req.prompt);
  return fmt::format("{}|{:016x}|{:016x}|{:016x}", judge_id, stable_hash(prompt_material),
                     stable_hash(req.baseline), stable_hash(req.candidate));
}

namespace {

struct Entry {
  Verdict verdict = Verdict::Tie;
  std::optional<std::string> raw;
  std::string judge_id;
};

}  // namespace

struct CachedJudge::Impl {
  std::shared_ptr<Judge> inner;
  std::optional<std::filesystem::path> file;
  std::ofstream appender;

  mutable std::mutex mu;
  std::unordered_map<std::string, Entry> entries;
  std::unordered_map<std::string, std::shared_future<Entry>> pending;

  std::atomic<std::size_t> hits{0};
  std::atomic<std::size_t> misses{0};
  std::size_t corrupt = 0;

  void load() {
    std::ifstream in(*file, std::ios::binary);
    if (!in) return;  // first run
    const std::string own_id = inner->id();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const json j = json::parse(line);
        Entry e;
        e.verdict = verdict_from_string(j.at("verdict").get<std::string>());
        if (const auto& raw = j.at("raw"); !raw.is_null()) e.raw = raw.get<std::string>();
        e.judge_id = own_id;
        entries.insert_or_assign(j.at("key").get<std::string>(), std::move(e));
      } catch (const std::exception& ex) {
        ++corrupt;
        spdlog::warn("judge cache {}:{}: ignoring corrupt row ({})", file->string(), lineno,
                     ex.what());
      }
    }
  }

  void persist(const std::string& key, const Entry& e) {
    if (!appender.is_open()) return;
    json row = {{"key", key}, {"verdict", to_string(e.verdict)}};
    row["raw"] = e.raw ? json(*e.raw) : json(nullptr);
    appender << row.dump() << '\n';
    appender.flush();
    if (!appender) spdlog::warn("judge cache: write to {} failed", file->string());
  }
};

CachedJudge::CachedJudge(std::shared_ptr<Judge> inner,
                         std::optional<std::filesystem::path> cache_file)
    : impl_(std::make_unique<Impl>()) {
  if (!inner) throw ConfigError("CachedJudge needs an inner judge");
  impl_->inner = std::move(inner);
  impl_->file = std::move(cache_file);
  if (impl_->file) {
    impl_->load();
    impl_->appender.open(*impl_->file, std::ios::binary | std::ios::app);
    if (!impl_->appender) throw IoError("cannot open judge cache " + impl_->file->string());
  }
}

CachedJudge::~CachedJudge() = default;

std::string CachedJudge::id() const { return impl_->inner->id(); }

ComparisonOutcome CachedJudge::compare(const CompareRequest& req) {
  const std::string key = make_key(impl_->inner->id(), req);

  auto to_outcome = [&req](const Entry& e) {
    ComparisonOutcome out;
    out.verdict = e.verdict;
    out.baseline_index = req.baseline_index;
    out.candidate_index = req.candidate_index;
    out.judge_id = e.judge_id;
    out.raw_evidence = e.raw;
    return out;
  };

  std::promise<Entry> promise;
  {
    std::unique_lock lock(impl_->mu);
    if (auto it = impl_->entries.find(key); it != impl_->entries.end()) {
      ++impl_->hits;
      return to_outcome(it->second);
    }
    if (auto it = impl_->pending.find(key); it != impl_->pending.end()) {
      auto fut = it->second;
      lock.unlock();
      ++impl_->hits;
      return to_outcome(fut.get());
    }
    impl_->pending.emplace(key, promise.get_future().share());
  }

  ++impl_->misses;
  ComparisonOutcome out;
  try {
    out = impl_->inner->compare(req);
  } catch (...) {
    std::lock_guard lock(impl_->mu);
    impl_->pending.erase(key);
    promise.set_exception(std::current_exception());
    throw;
  }

  Entry e{out.verdict, out.raw_evidence, out.judge_id};
  {
    std::lock_guard lock(impl_->mu);
    impl_->entries.insert_or_assign(key, e);
    impl_->pending.erase(key);
    impl_->persist(key, e);
  }
  promise.set_value(std::move(e));
  return out;
}

std::size_t CachedJudge::hits() const noexcept { return impl_->hits.load(); }
std::size_t CachedJudge::misses() const noexcept { return impl_->misses.load(); }

std::size_t CachedJudge::size() const {
  std::lock_guard lock(impl_->mu);
  return impl_->entries.size();
}

std::size_t CachedJudge::corrupt_rows() const noexcept { return impl_->corrupt; }

}  // namespace prefopt
