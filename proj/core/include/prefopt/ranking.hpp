// SPDX-License-Identifier: Apache-2.0
//
// Tournament selection of preferred / dispreferred completions.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefopt/error.hpp"
#include "prefopt/judge.hpp"
#include "prefopt/prefdata.hpp"

namespace prefopt {

enum class StopRule {
  /// Compare the running winner against every remaining candidate.
  Full,
  /// Stop at the first non-tie duel; its winner is the overall winner.
  FirstNonTie,
};

enum class LoserRule { InvertedIpr, ScoringArgmin };

std::string_view to_string(StopRule s) noexcept;
StopRule stop_rule_from_string(std::string_view s);
std::string_view to_string(LoserRule r) noexcept;
LoserRule loser_rule_from_string(std::string_view s);

/// A judge failure inside a tournament. partial_trace holds the outcomes
/// recorded before the failing duel.
class TournamentError : public JudgeError {
 public:
  TournamentError(const std::string& what, RankingTrace partial_trace, std::size_t baseline_index,
                  std::size_t candidate_index);

  const RankingTrace& partial_trace() const noexcept { return partial_; }
  std::size_t baseline_index() const noexcept { return baseline_; }
  std::size_t candidate_index() const noexcept { return candidate_; }

 private:
  RankingTrace partial_;
  std::size_t baseline_;
  std::size_t candidate_;
};

/// Iterative pairwise ranking. The baseline starts at index 0 and duels
/// candidates 1..M-1 in order; it is replaced only on CandidateWins, so ties
/// keep the current baseline. In Full mode exactly M-1 duels are recorded.
RankingTrace ipr_select(const CandidateSet& set, std::string_view prompt, Judge& judge,
                        StopRule stop = StopRule::Full);

struct LoserSelection {
  std::size_t loser_index = 0;
  /// The judge's own verdicts, in tournament order.
  std::vector<ComparisonOutcome> outcomes;
};

/// Runs ipr_select with BaselineWins/CandidateWins exchanged; the winner of
/// that inverted tournament is the loser.
LoserSelection ipr_select_loser(const CandidateSet& set, std::string_view prompt, Judge& judge,
                                StopRule stop = StopRule::Full);

struct CopelandResult {
  std::size_t winner_index = 0;
  /// Winner of the same duels with verdicts inverted (most losses).
  std::size_t loser_index = 0;
  std::vector<int> wins;
  std::vector<int> losses;
  /// All M(M-1)/2 duels, baseline = lower index.
  RankingTrace trace;
};

/// Round-robin over all unordered pairs. Score = wins; ties score nothing.
/// Score ties break toward the lowest index.
CopelandResult copeland_select(const CandidateSet& set, std::string_view prompt, Judge& judge);

struct ScoringResult {
  std::size_t argmax_index = 0;
  std::size_t argmin_index = 0;
  std::vector<double> scores;
};

/// Scores each candidate once. Ties break toward the lowest index.
ScoringResult scoring_select(const CandidateSet& set, std::string_view prompt, Scorer& scorer,
                             Rng& rng);

// ---------------------------------------------------------------------------
// Batch pair construction

struct BuildOptions {
  Strategy strategy = Strategy::IPR;
  StopRule stop = StopRule::Full;
  /// Only read for the IPR strategy.
  LoserRule loser = LoserRule::InvertedIpr;
  /// Rethrow the first per-set failure instead of recording it.
  bool fail_fast = false;
  std::size_t max_in_flight = 1;
  /// Scorer noise for set i is drawn from Rng(seed_seq{seed, i}).
  std::uint64_t seed = 0;
};

struct BuildEntry {
  std::string prompt_id;
  std::optional<PreferencePair> pair;
  /// Winner-selection trace (IPR or Copeland); absent for Scoring.
  std::optional<RankingTrace> trace;
  std::optional<std::string> skip_reason;
  std::optional<std::string> error;
};

struct BuildReport {
  /// One entry per candidate set, in input order.
  std::vector<BuildEntry> entries;

  std::vector<PreferencePair> pairs() const;
  std::vector<RankingTrace> traces() const;
  std::size_t skipped() const;
  std::size_t failed() const;
};

/// Builds one preference pair per candidate set. Throws DataError if a set's
/// prompt_id has no prompt. IPR needs `judge` (and `scorer` for
/// LoserRule::ScoringArgmin); Copeland needs `judge`; Scoring needs `scorer`.
///
/// A pair's trace holds every judge duel spent on it; for IPR that is the
/// winner tournament followed by the loser tournament.
BuildReport build_pairs(std::span<const PromptRecord> prompts,
                        std::span<const CandidateSet> candidate_sets, const BuildOptions& options,
                        Judge* judge, Scorer* scorer);

// ---------------------------------------------------------------------------
// Tournament statistics

struct IterationStats {
  /// 1-based duel index within the tournament.
  std::size_t iteration = 0;
  std::size_t ties = 0;
  std::size_t candidate_wins = 0;
  std::size_t baseline_wins = 0;
};

/// Verdict histogram per duel position over Full-mode IPR traces. Throws
/// DataError when traces come from different M or are not Full IPR chains.
std::vector<IterationStats> tournament_stats(std::span<const RankingTrace> traces);

/// Header "iteration,tie,candidate_wins,baseline_wins".
std::string to_csv(std::span<const IterationStats> stats);

}  // namespace prefopt
