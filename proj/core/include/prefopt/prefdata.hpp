// SPDX-License-Identifier: Apache-2.0
//
// Dataset records and their JSONL persistence. Text fields are stored byte
// for byte; nothing is normalized.
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prefopt {

struct PromptRecord {
  std::string id;
  std::string prompt;

  bool operator==(const PromptRecord&) const = default;
};

/// A prompt's candidate completions. Index 0 is the tournament's initial
/// baseline, so the order is significant.
struct CandidateSet {
  std::string prompt_id;
  std::vector<std::string> candidates;

  std::size_t size() const noexcept { return candidates.size(); }
  bool operator==(const CandidateSet&) const = default;
};

enum class Verdict { BaselineWins, CandidateWins, Tie };

/// BaselineWins <-> CandidateWins; Tie is fixed.
constexpr Verdict mirror(Verdict v) noexcept {
  switch (v) {
    case Verdict::BaselineWins: return Verdict::CandidateWins;
    case Verdict::CandidateWins: return Verdict::BaselineWins;
    case Verdict::Tie: break;
  }
  return Verdict::Tie;
}

std::string_view to_string(Verdict v) noexcept;
Verdict verdict_from_string(std::string_view s);

struct ComparisonOutcome {
  Verdict verdict = Verdict::Tie;
  std::size_t baseline_index = 0;
  std::size_t candidate_index = 1;
  std::string judge_id;
  std::optional<std::string> raw_evidence;

  bool operator==(const ComparisonOutcome&) const = default;
};

/// Record of one selection run over a candidate set.
struct RankingTrace {
  std::string prompt_id;
  std::vector<ComparisonOutcome> outcomes;
  std::size_t winner_index = 0;
  std::optional<std::size_t> loser_index;
  std::size_t judge_calls = 0;

  bool operator==(const RankingTrace&) const = default;
};

enum class Strategy { IPR, Scoring, Copeland };

std::string_view to_string(Strategy s) noexcept;
Strategy strategy_from_string(std::string_view s);

struct PreferencePair {
  std::string prompt_id;
  std::string prompt;
  std::string preferred;
  std::string dispreferred;
  Strategy strategy = Strategy::IPR;
  std::optional<RankingTrace> trace;

  bool operator==(const PreferencePair&) const = default;
};

/// Throws DataError if preferred == dispreferred.
void validate(const PreferencePair& pair);
/// Throws DataError on M < 2.
void validate(const CandidateSet& set);

// Readers throw DataError("<path>:<line>: ...") on malformed rows and
// IoError when the file cannot be opened. Blank lines are skipped.
std::vector<PromptRecord> read_prompts(const std::filesystem::path& path);
std::vector<CandidateSet> read_candidates(const std::filesystem::path& path);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);
std::vector<RankingTrace> read_traces(const std::filesystem::path& path);

void write_prompts(std::span<const PromptRecord> prompts, const std::filesystem::path& path);
void write_candidates(std::span<const CandidateSet> sets, const std::filesystem::path& path);
/// Validates every pair before anything is written.
void write_pairs(std::span<const PreferencePair> pairs, const std::filesystem::path& path);
void write_traces(std::span<const RankingTrace> traces, const std::filesystem::path& path);

// Single-row codecs, exposed for tools that stream rows themselves.
std::string to_jsonl_row(const PromptRecord& r);
std::string to_jsonl_row(const CandidateSet& s);
std::string to_jsonl_row(const PreferencePair& p);
std::string to_jsonl_row(const RankingTrace& t);

PromptRecord prompt_from_jsonl_row(std::string_view line);
CandidateSet candidates_from_jsonl_row(std::string_view line);
PreferencePair pair_from_jsonl_row(std::string_view line);
RankingTrace trace_from_jsonl_row(std::string_view line);

}  // namespace prefopt
