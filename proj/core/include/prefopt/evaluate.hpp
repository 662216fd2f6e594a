// SPDX-License-Identifier: Apache-2.0
//
// Agreement of preference pairs with an evaluation judge.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefopt/judge.hpp"
#include "prefopt/ranking.hpp"

namespace prefopt {

struct AgreementOptions {
  bool symmetrize = false;
  std::size_t max_in_flight = 1;
};

struct AgreementResult {
  /// Pairs that were judged; failures are excluded.
  std::size_t n = 0;
  std::size_t agree = 0;
  std::size_t ties = 0;
  std::size_t disagree = 0;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;

  double agreement_pct() const noexcept;
  double tie_pct() const noexcept;
  double disagreement_pct() const noexcept;
};

/// Judges every pair with the dispreferred completion as baseline and the
/// preferred one as candidate; CandidateWins counts as agreement. Candidate
/// indices are resolved against `candidate_sets` by text. Throws DataError
/// for an empty pair list and JudgeError("no judged pairs") when every pair
/// failed.
AgreementResult agreement(std::span<const PreferencePair> pairs,
                          std::span<const CandidateSet> candidate_sets, Judge& judge,
                          const AgreementOptions& options = {});

struct StrategyConfig {
  std::string label;
  BuildOptions options;
  Judge* judge = nullptr;
  Scorer* scorer = nullptr;
};

struct StrategyRow {
  std::string label;
  AgreementResult result;
  std::size_t pairs_built = 0;
  std::size_t skipped = 0;
  std::optional<std::string> error;
};

/// Builds pairs with each config and scores them against `eval_judge`.
/// Per-strategy failures land in StrategyRow::error.
std::vector<StrategyRow> compare_strategies(std::span<const PromptRecord> prompts,
                                            std::span<const CandidateSet> candidate_sets,
                                            Judge& eval_judge,
                                            std::span<const StrategyConfig> configs,
                                            const AgreementOptions& options = {});

/// Columns: strategy,n,agreement_pct,tie_pct,disagreement_pct.
std::string to_csv(std::span<const StrategyRow> rows);

}  // namespace prefopt
