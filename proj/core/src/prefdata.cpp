// SPDX-License-Identifier: Apache-2.0
#include "prefopt/prefdata.hpp"

#include <unordered_set>

#include "jsonl_io.hpp"
#include "prefopt/error.hpp"

namespace prefopt {

using detail::json;

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::BaselineWins: return "baseline_wins";
    case Verdict::CandidateWins: return "candidate_wins";
    case Verdict::Tie: break;
  }
  return "tie";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "baseline_wins") return Verdict::BaselineWins;
  if (s == "candidate_wins") return Verdict::CandidateWins;
  if (s == "tie") return Verdict::Tie;
  throw DataError("unknown verdict \"" + std::string(s) + "\"");
}

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::IPR: return "ipr";
    case Strategy::Scoring: return "scoring";
    case Strategy::Copeland: break;
  }
  return "copeland";
}

Strategy strategy_from_string(std::string_view s) {
  if (s == "ipr") return Strategy::IPR;
  if (s == "scoring") return Strategy::Scoring;
  if (s == "copeland") return Strategy::Copeland;
  throw DataError("unknown strategy \"" + std::string(s) + "\"");
}

void validate(const PreferencePair& pair) {
  if (pair.preferred == pair.dispreferred)
    throw DataError("preference pair for prompt \"" + pair.prompt_id +
                    "\" has preferred == dispreferred");
}

void validate(const CandidateSet& set) {
  if (set.candidates.size() < 2)
    throw DataError("need at least 2 candidates (prompt_id \"" + set.prompt_id + "\" has " +
                    std::to_string(set.candidates.size()) + ")");
}

namespace {

json to_json(const ComparisonOutcome& o) {
  json j = {{"verdict", to_string(o.verdict)},
            {"baseline_index", o.baseline_index},
            {"candidate_index", o.candidate_index},
            {"judge_id", o.judge_id}};
  j["raw_evidence"] = o.raw_evidence ? json(*o.raw_evidence) : json(nullptr);
  return j;
}

ComparisonOutcome outcome_from_json(const json& j) {
  if (!j.is_object()) throw DataError("outcome must be an object");
  ComparisonOutcome o;
  o.verdict = verdict_from_string(detail::require_string(j, "verdict"));
  o.baseline_index = detail::require_index(j, "baseline_index");
  o.candidate_index = detail::require_index(j, "candidate_index");
  if (o.baseline_index == o.candidate_index)
    throw DataError("outcome compares candidate " + std::to_string(o.baseline_index) +
                    " with itself");
  o.judge_id = detail::require_string(j, "judge_id");
  if (auto it = j.find("raw_evidence"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw DataError("raw_evidence must be a string or null");
    o.raw_evidence = it->get<std::string>();
  }
  return o;
}

json to_json(const RankingTrace& t) {
  json outcomes = json::array();
  for (const auto& o : t.outcomes) outcomes.push_back(to_json(o));
  json j = {{"prompt_id", t.prompt_id},
            {"outcomes", std::move(outcomes)},
            {"winner_index", t.winner_index},
            {"judge_calls", t.judge_calls}};
  j["loser_index"] = t.loser_index ? json(*t.loser_index) : json(nullptr);
  return j;
}

RankingTrace trace_from_json(const json& j) {
  if (!j.is_object()) throw DataError("trace must be an object");
  RankingTrace t;
  t.prompt_id = detail::require_string(j, "prompt_id");
  const json& outcomes = detail::require(j, "outcomes");
  if (!outcomes.is_array()) throw DataError("field \"outcomes\" must be an array");
  t.outcomes.reserve(outcomes.size());
  for (const auto& o : outcomes) t.outcomes.push_back(outcome_from_json(o));
  t.winner_index = detail::require_index(j, "winner_index");
  if (auto it = j.find("loser_index"); it != j.end() && !it->is_null())
    t.loser_index = detail::require_index(j, "loser_index");
  t.judge_calls = detail::require_index(j, "judge_calls");
  return t;
}

template <class T, class Encode>
void write_rows(std::span<const T> rows, const std::filesystem::path& path, Encode encode) {
  std::string body;
  for (const auto& r : rows) {
    body += encode(r);
    body += '\n';
  }
  detail::write_text(path, body);
}

}  // namespace

std::string to_jsonl_row(const PromptRecord& r) {
  return json{{"id", r.id}, {"prompt", r.prompt}}.dump();
}

std::string to_jsonl_row(const CandidateSet& s) {
  return json{{"prompt_id", s.prompt_id}, {"candidates", s.candidates}}.dump();
}

std::string to_jsonl_row(const PreferencePair& p) {
  json j = {{"prompt_id", p.prompt_id},       {"prompt", p.prompt},
            {"preferred", p.preferred},       {"dispreferred", p.dispreferred},
            {"strategy", to_string(p.strategy)}};
  j["trace"] = p.trace ? to_json(*p.trace) : json(nullptr);
  return j.dump();
}

std::string to_jsonl_row(const RankingTrace& t) { return to_json(t).dump(); }

PromptRecord prompt_from_jsonl_row(std::string_view line) {
  json j = detail::parse_object(line);
  PromptRecord r{detail::require_string(j, "id"), detail::require_string(j, "prompt")};
  if (r.id.empty()) throw DataError("field \"id\" must be non-empty");
  return r;
}

CandidateSet candidates_from_jsonl_row(std::string_view line) {
  json j = detail::parse_object(line);
  CandidateSet s;
  s.prompt_id = detail::require_string(j, "prompt_id");
  const json& c = detail::require(j, "candidates");
  if (!c.is_array()) throw DataError("field \"candidates\" must be an array");
  for (const auto& x : c) {
    if (!x.is_string()) throw DataError("candidates must be strings");
    s.candidates.push_back(x.get<std::string>());
  }
  validate(s);
  return s;
}

PreferencePair pair_from_jsonl_row(std::string_view line) {
  json j = detail::parse_object(line);
  PreferencePair p;
  p.prompt_id = detail::require_string(j, "prompt_id");
  p.prompt = detail::require_string(j, "prompt");
  p.preferred = detail::require_string(j, "preferred");
  p.dispreferred = detail::require_string(j, "dispreferred");
  p.strategy = strategy_from_string(detail::require_string(j, "strategy"));
  if (auto it = j.find("trace"); it != j.end() && !it->is_null()) p.trace = trace_from_json(*it);
  validate(p);
  return p;
}

RankingTrace trace_from_jsonl_row(std::string_view line) {
  return trace_from_json(detail::parse_object(line));
}

std::vector<PromptRecord> read_prompts(const std::filesystem::path& path) {
  std::vector<PromptRecord> out;
  std::unordered_set<std::string> seen;
  detail::for_each_line(path, [&](std::string_view line, std::size_t) {
    PromptRecord r = prompt_from_jsonl_row(line);
    if (!seen.insert(r.id).second) throw DataError("duplicate prompt id \"" + r.id + "\"");
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<CandidateSet> read_candidates(const std::filesystem::path& path) {
  std::vector<CandidateSet> out;
  detail::for_each_line(path, [&](std::string_view line, std::size_t) {
    out.push_back(candidates_from_jsonl_row(line));
  });
  return out;
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
  std::vector<PreferencePair> out;
  detail::for_each_line(path, [&](std::string_view line, std::size_t) {
    out.push_back(pair_from_jsonl_row(line));
  });
  return out;
}

std::vector<RankingTrace> read_traces(const std::filesystem::path& path) {
  std::vector<RankingTrace> out;
  detail::for_each_line(path, [&](std::string_view line, std::size_t) {
    out.push_back(trace_from_jsonl_row(line));
  });
  return out;
}

void write_prompts(std::span<const PromptRecord> prompts, const std::filesystem::path& path) {
  write_rows(prompts, path, [](const PromptRecord& r) { return to_jsonl_row(r); });
}

void write_candidates(std::span<const CandidateSet> sets, const std::filesystem::path& path) {
  for (const auto& s : sets) validate(s);
  write_rows(sets, path, [](const CandidateSet& s) { return to_jsonl_row(s); });
}

void write_pairs(std::span<const PreferencePair> pairs, const std::filesystem::path& path) {
  for (const auto& p : pairs) validate(p);
  write_rows(pairs, path, [](const PreferencePair& p) { return to_jsonl_row(p); });
}

void write_traces(std::span<const RankingTrace> traces, const std::filesystem::path& path) {
  write_rows(traces, path, [](const RankingTrace& t) { return to_jsonl_row(t); });
}

}  // namespace prefopt
