// SPDX-License-Identifier: Apache-2.0
//
// Pairwise judges and pointwise scorers.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prefopt/prefdata.hpp"

namespace prefopt {

using Rng = std::mt19937_64;

/// One duel. Text views must outlive the call.
struct CompareRequest {
  std::string_view prompt_id;
  std::string_view prompt;
  std::size_t baseline_index = 0;
  std::string_view baseline;
  std::size_t candidate_index = 1;
  std::string_view candidate;
};

/// The same duel with baseline and candidate exchanged.
CompareRequest swapped(const CompareRequest& req) noexcept;

/// A pairwise comparison backend. Implementations must be safe to call from
/// several threads at once.
class Judge {
 public:
  virtual ~Judge() = default;

  virtual std::string id() const = 0;
  virtual ComparisonOutcome compare(const CompareRequest& req) = 0;
};

/// Judges both orderings and returns Tie when the mapped verdicts disagree.
/// The returned outcome is expressed in the orientation of `req`.
ComparisonOutcome symmetrized_compare(Judge& judge, const CompareRequest& req);

/// Wraps any judge with symmetrized_compare.
class SymmetrizedJudge final : public Judge {
 public:
  explicit SymmetrizedJudge(std::shared_ptr<Judge> inner);

  std::string id() const override;
  ComparisonOutcome compare(const CompareRequest& req) override;

 private:
  std::shared_ptr<Judge> inner_;
};

// ---------------------------------------------------------------------------
// Latent rewards and the simulated judge

/// Ground-truth rewards keyed by (prompt_id, candidate index), plus a
/// symmetric tie band applied to reward gaps.
class LatentRewardTable {
 public:
  LatentRewardTable() = default;
  explicit LatentRewardTable(double tie_band);

  double tie_band() const noexcept { return tie_band_; }
  void set_tie_band(double tie_band);

  void set(std::string_view prompt_id, std::size_t index, double reward);
  /// Sets rewards for indices 0..rewards.size()-1.
  void set_all(std::string_view prompt_id, std::span<const double> rewards);

  bool contains(std::string_view prompt_id, std::size_t index) const;
  /// Throws JudgeError when the entry is missing.
  double at(std::string_view prompt_id, std::size_t index) const;
  /// All rewards for one prompt, ordered by index. Empty if unknown.
  std::vector<double> rewards_for(std::string_view prompt_id) const;

  std::size_t size() const noexcept { return rewards_.size(); }

 private:
  std::map<std::pair<std::string, std::size_t>, double, std::less<>> rewards_;
  double tie_band_ = 0.0;
};

/// JSONL rows of {"prompt_id": ..., "rewards": [r0, r1, ...]}.
LatentRewardTable read_reward_table(const std::filesystem::path& path, double tie_band);
void write_reward_table(const LatentRewardTable& table, std::span<const std::string> prompt_ids,
                        const std::filesystem::path& path);

/// BaselineWins if r(b) > r(c) + eps, CandidateWins if r(c) > r(b) + eps,
/// Tie otherwise. raw_evidence holds the reward gap r(c) - r(b).
ComparisonOutcome simulated_compare(const LatentRewardTable& table, std::string_view prompt_id,
                                    std::size_t baseline_index, std::size_t candidate_index);

class SimulatedJudge final : public Judge {
 public:
  explicit SimulatedJudge(std::shared_ptr<const LatentRewardTable> table);

  std::string id() const override { return "simulated"; }
  ComparisonOutcome compare(const CompareRequest& req) override;

  const LatentRewardTable& table() const noexcept { return *table_; }

 private:
  std::shared_ptr<const LatentRewardTable> table_;
};

// ---------------------------------------------------------------------------
// Scorers (pointwise reward models)

struct ScoreRequest {
  std::string_view prompt_id;
  std::string_view prompt;
  std::size_t candidate_index = 0;
  std::string_view completion;
};

class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::string id() const = 0;
  virtual double score(const ScoreRequest& req, Rng& rng) = 0;
};

struct ScorerConfig {
  std::shared_ptr<const LatentRewardTable> table;
  /// Std-dev of additive Gaussian score noise; 0 gives exact rewards.
  double noise_sigma = 0.0;

  void validate() const;
};

/// Latent reward plus N(0, noise_sigma^2). Draws from `rng` only when
/// noise_sigma > 0.
double score(const ScorerConfig& config, const ScoreRequest& req, Rng& rng);

class TableScorer final : public Scorer {
 public:
  explicit TableScorer(ScorerConfig config);

  std::string id() const override;
  double score(const ScoreRequest& req, Rng& rng) override;

 private:
  ScorerConfig config_;
};

// ---------------------------------------------------------------------------
// LLM judge prompt

enum class JudgeVerdict { A, B, Tie };

std::string_view to_string(JudgeVerdict v) noexcept;

/// Fills the pairwise judge template. All three inputs must be non-empty.
std::string render_judge_prompt(std::string_view question, std::string_view response_a,
                                std::string_view response_b);

/// Extracts the last <verdict>...</verdict> tag (case-insensitive, trimmed).
/// Throws ParseError carrying `raw` when no usable tag exists.
JudgeVerdict parse_verdict(std::string_view raw);

/// Maps an A/B verdict onto baseline/candidate given which side the baseline
/// was presented on.
Verdict to_outcome_verdict(JudgeVerdict v, bool baseline_is_a) noexcept;

}  // namespace prefopt
