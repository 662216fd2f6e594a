// SPDX-License-Identifier: Apache-2.0
#include "prefopt/ranking.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <spdlog/spdlog.h>

namespace prefopt {

std::string_view to_string(StopRule s) noexcept {
  return s == StopRule::Full ? "full" : "first-non-tie";
}

StopRule stop_rule_from_string(std::string_view s) {
  if (s == "full") return StopRule::Full;
  if (s == "first-non-tie") return StopRule::FirstNonTie;
  throw ConfigError("unknown stop rule \"" + std::string(s) + "\"");
}

std::string_view to_string(LoserRule r) noexcept {
  return r == LoserRule::InvertedIpr ? "inverted-ipr" : "scoring-argmin";
}

LoserRule loser_rule_from_string(std::string_view s) {
  if (s == "inverted-ipr") return LoserRule::InvertedIpr;
  if (s == "scoring-argmin") return LoserRule::ScoringArgmin;
  throw ConfigError("unknown loser rule \"" + std::string(s) + "\"");
}

TournamentError::TournamentError(const std::string& what, RankingTrace partial_trace,
                                 std::size_t baseline_index, std::size_t candidate_index)
    : JudgeError(what),
      partial_(std::move(partial_trace)),
      baseline_(baseline_index),
      candidate_(candidate_index) {}

namespace {

struct ChainResult {
  std::size_t final_baseline = 0;
  std::vector<ComparisonOutcome> outcomes;
};

CompareRequest make_request(const CandidateSet& set, std::string_view prompt, std::size_t b,
                            std::size_t c) {
  return CompareRequest{set.prompt_id, prompt, b, set.candidates[b], c, set.candidates[c]};
}

[[noreturn]] void rethrow_as_tournament_error(const CandidateSet& set,
                                              std::vector<ComparisonOutcome> outcomes,
                                              std::size_t baseline, std::size_t candidate) {
  std::string what;
  try {
    throw;
  } catch (const std::exception& e) {
    what = e.what();
  }
  RankingTrace partial;
  partial.prompt_id = set.prompt_id;
  partial.judge_calls = outcomes.size();
  partial.outcomes = std::move(outcomes);
  partial.winner_index = baseline;
  throw TournamentError("judge failed on prompt \"" + set.prompt_id + "\" duel (" +
                            std::to_string(baseline) + " vs " + std::to_string(candidate) +
                            "): " + what,
                        std::move(partial), baseline, candidate);
}

// The sequential chain. With `invert`, BaselineWins and CandidateWins swap
// roles when deciding who advances; recorded outcomes stay as judged.
ChainResult run_chain(const CandidateSet& set, std::string_view prompt, Judge& judge,
                      StopRule stop, bool invert) {
  validate(set);
  ChainResult r;
  r.outcomes.reserve(set.size() - 1);
  for (std::size_t k = 1; k < set.size(); ++k) {
    ComparisonOutcome o;
    try {
      o = judge.compare(make_request(set, prompt, r.final_baseline, k));
    } catch (...) {
      rethrow_as_tournament_error(set, std::move(r.outcomes), r.final_baseline, k);
    }
    const Verdict v = invert ? mirror(o.verdict) : o.verdict;
    r.outcomes.push_back(std::move(o));
    if (v == Verdict::CandidateWins) r.final_baseline = k;
    if (stop == StopRule::FirstNonTie && v != Verdict::Tie) break;
  }
  return r;
}

}  // namespace

RankingTrace ipr_select(const CandidateSet& set, std::string_view prompt, Judge& judge,
                        StopRule stop) {
  ChainResult r = run_chain(set, prompt, judge, stop, /*invert=*/false);
  RankingTrace t;
  t.prompt_id = set.prompt_id;
  t.winner_index = r.final_baseline;
  t.judge_calls = r.outcomes.size();
  t.outcomes = std::move(r.outcomes);
  return t;
}

LoserSelection ipr_select_loser(const CandidateSet& set, std::string_view prompt, Judge& judge,
                                StopRule stop) {
  ChainResult r = run_chain(set, prompt, judge, stop, /*invert=*/true);
  return LoserSelection{r.final_baseline, std::move(r.outcomes)};
}

CopelandResult copeland_select(const CandidateSet& set, std::string_view prompt, Judge& judge) {
  validate(set);
  const std::size_t m = set.size();
  CopelandResult r;
  r.wins.assign(m, 0);
  r.losses.assign(m, 0);
  r.trace.prompt_id = set.prompt_id;
  r.trace.outcomes.reserve(m * (m - 1) / 2);

  for (std::size_t i = 0; i + 1 < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      ComparisonOutcome o;
      try {
        o = judge.compare(make_request(set, prompt, i, j));
      } catch (...) {
        rethrow_as_tournament_error(set, std::move(r.trace.outcomes), i, j);
      }
      if (o.verdict == Verdict::BaselineWins) {
        ++r.wins[i];
        ++r.losses[j];
      } else if (o.verdict == Verdict::CandidateWins) {
        ++r.wins[j];
        ++r.losses[i];
      }
      r.trace.outcomes.push_back(std::move(o));
    }
  }

  // max_element returns the first maximum, i.e. the lowest index.
  r.winner_index = static_cast<std::size_t>(
      std::distance(r.wins.begin(), std::max_element(r.wins.begin(), r.wins.end())));
  r.loser_index = static_cast<std::size_t>(
      std::distance(r.losses.begin(), std::max_element(r.losses.begin(), r.losses.end())));
  r.trace.winner_index = r.winner_index;
  r.trace.loser_index = r.loser_index;
  r.trace.judge_calls = r.trace.outcomes.size();
  return r;
}

ScoringResult scoring_select(const CandidateSet& set, std::string_view prompt, Scorer& scorer,
                             Rng& rng) {
  validate(set);
  ScoringResult r;
  r.scores.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i)
    r.scores.push_back(scorer.score(ScoreRequest{set.prompt_id, prompt, i, set.candidates[i]}, rng));
  for (std::size_t i = 1; i < r.scores.size(); ++i) {
    if (r.scores[i] > r.scores[r.argmax_index]) r.argmax_index = i;
    if (r.scores[i] < r.scores[r.argmin_index]) r.argmin_index = i;
  }
  return r;
}

// ---------------------------------------------------------------------------

std::vector<PreferencePair> BuildReport::pairs() const {
  std::vector<PreferencePair> out;
  for (const auto& e : entries)
    if (e.pair) out.push_back(*e.pair);
  return out;
}

std::vector<RankingTrace> BuildReport::traces() const {
  std::vector<RankingTrace> out;
  for (const auto& e : entries)
    if (e.trace) out.push_back(*e.trace);
  return out;
}

std::size_t BuildReport::skipped() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.skip_reason.has_value(); }));
}

std::size_t BuildReport::failed() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.error.has_value(); }));
}

namespace {

Rng set_rng(std::uint64_t seed, std::size_t index) {
  const auto i = static_cast<std::uint64_t>(index);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
  return Rng(seq);
}

BuildEntry build_one(const CandidateSet& set, const PromptRecord& prompt,
                     const BuildOptions& options, std::size_t index, Judge* judge,
                     Scorer* scorer) {
  BuildEntry entry;
  entry.prompt_id = set.prompt_id;

  std::size_t winner = 0;
  std::size_t loser = 0;
  std::optional<RankingTrace> pair_trace;

  switch (options.strategy) {
    case Strategy::IPR: {
      RankingTrace trace = ipr_select(set, prompt.prompt, *judge, options.stop);
      std::vector<ComparisonOutcome> all = trace.outcomes;
      if (options.loser == LoserRule::InvertedIpr) {
        LoserSelection ls = ipr_select_loser(set, prompt.prompt, *judge, options.stop);
        loser = ls.loser_index;
        all.insert(all.end(), std::make_move_iterator(ls.outcomes.begin()),
                   std::make_move_iterator(ls.outcomes.end()));
      } else {
        Rng rng = set_rng(options.seed, index);
        loser = scoring_select(set, prompt.prompt, *scorer, rng).argmin_index;
      }
      winner = trace.winner_index;
      trace.loser_index = loser;
      pair_trace = RankingTrace{set.prompt_id, std::move(all), winner, loser, 0};
      pair_trace->judge_calls = pair_trace->outcomes.size();
      entry.trace = std::move(trace);
      break;
    }
    case Strategy::Copeland: {
      CopelandResult cr = copeland_select(set, prompt.prompt, *judge);
      winner = cr.winner_index;
      loser = cr.loser_index;
      entry.trace = cr.trace;
      pair_trace = std::move(cr.trace);
      break;
    }
    case Strategy::Scoring: {
      Rng rng = set_rng(options.seed, index);
      ScoringResult sr = scoring_select(set, prompt.prompt, *scorer, rng);
      winner = sr.argmax_index;
      loser = sr.argmin_index;
      break;
    }
  }

  if (winner == loser) {
    entry.skip_reason = "degenerate: winner==loser";
  } else if (set.candidates[winner] == set.candidates[loser]) {
    entry.skip_reason = "degenerate: identical completions";
  }
  if (entry.skip_reason) {
    spdlog::info("skipping prompt {}: {} (index {})", set.prompt_id, *entry.skip_reason, winner);
    return entry;
  }

  entry.pair = PreferencePair{set.prompt_id,         prompt.prompt,   set.candidates[winner],
                              set.candidates[loser], options.strategy, std::move(pair_trace)};
  return entry;
}

}  // namespace

BuildReport build_pairs(std::span<const PromptRecord> prompts,
                        std::span<const CandidateSet> candidate_sets, const BuildOptions& options,
                        Judge* judge, Scorer* scorer) {
  const bool needs_judge = options.strategy != Strategy::Scoring;
  const bool needs_scorer = options.strategy == Strategy::Scoring ||
                            (options.strategy == Strategy::IPR && options.loser == LoserRule::ScoringArgmin);
  if (needs_judge && judge == nullptr)
    throw ConfigError("strategy " + std::string(to_string(options.strategy)) + " needs a judge");
  if (needs_scorer && scorer == nullptr)
    throw ConfigError("strategy " + std::string(to_string(options.strategy)) + " needs a scorer");

  std::unordered_map<std::string_view, const PromptRecord*> by_id;
  for (const auto& p : prompts) by_id.emplace(p.id, &p);
  std::vector<const PromptRecord*> resolved;
  resolved.reserve(candidate_sets.size());
  for (const auto& set : candidate_sets) {
    auto it = by_id.find(set.prompt_id);
    if (it == by_id.end())
      throw DataError("candidate set refers to unknown prompt_id \"" + set.prompt_id + "\"");
    resolved.push_back(it->second);
  }

  BuildReport report;
  report.entries.resize(candidate_sets.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex first_error_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= candidate_sets.size()) return;
      BuildEntry& entry = report.entries[i];
      entry.prompt_id = candidate_sets[i].prompt_id;
      if (abort.load()) {
        entry.error = "not attempted (fail-fast)";
        continue;
      }
      try {
        entry = build_one(candidate_sets[i], *resolved[i], options, i, judge, scorer);
      } catch (const std::exception& e) {
        entry.error = e.what();
        spdlog::error("prompt {}: {}", entry.prompt_id, e.what());
        if (options.fail_fast) {
          std::lock_guard lock(first_error_mu);
          if (!first_error) first_error = std::current_exception();
          abort.store(true);
        }
      }
    }
  };

  const std::size_t threads =
      std::clamp<std::size_t>(options.max_in_flight, 1, std::max<std::size_t>(candidate_sets.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  if (first_error) std::rethrow_exception(first_error);
  return report;
}

// ---------------------------------------------------------------------------

std::vector<IterationStats> tournament_stats(std::span<const RankingTrace> traces) {
  if (traces.empty()) return {};
  const std::size_t duels = traces.front().outcomes.size();
  if (duels == 0) throw DataError("trace for \"" + traces.front().prompt_id + "\" has no duels");

  std::vector<IterationStats> stats(duels);
  for (std::size_t k = 0; k < duels; ++k) stats[k].iteration = k + 1;

  for (const auto& t : traces) {
    if (t.outcomes.size() != duels)
      throw DataError("mixed candidate counts: trace \"" + t.prompt_id + "\" has " +
                      std::to_string(t.outcomes.size()) + " duels, expected " +
                      std::to_string(duels));
    for (std::size_t k = 0; k < duels; ++k) {
      const auto& o = t.outcomes[k];
      if (o.candidate_index != k + 1)
        throw DataError("trace \"" + t.prompt_id + "\" is not a full IPR chain");
      switch (o.verdict) {
        case Verdict::Tie: ++stats[k].ties; break;
        case Verdict::CandidateWins: ++stats[k].candidate_wins; break;
        case Verdict::BaselineWins: ++stats[k].baseline_wins; break;
      }
    }
  }
  return stats;
}

std::string to_csv(std::span<const IterationStats> stats) {
  std::string out = "iteration,tie,candidate_wins,baseline_wins\n";
  for (const auto& s : stats) {
    out += std::to_string(s.iteration) + ',' + std::to_string(s.ties) + ',' +
           std::to_string(s.candidate_wins) + ',' + std::to_string(s.baseline_wins) + '\n';
  }
  return out;
}

}  // namespace prefopt
