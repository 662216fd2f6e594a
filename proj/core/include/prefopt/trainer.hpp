// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale preference training of a tabular softmax policy.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefopt/losses.hpp"
#include "prefopt/ranking.hpp"

namespace prefopt {

/// One logit vector per prompt over a fixed vocabulary of V atomic
/// completions. log pi(v | p) = log_softmax(logits[p])[v].
class ToyPolicy {
 public:
  ToyPolicy() = default;
  ToyPolicy(std::size_t num_prompts, std::size_t vocab);

  std::size_t num_prompts() const noexcept { return num_prompts_; }
  std::size_t vocab() const noexcept { return vocab_; }

  std::span<double> logits(std::size_t prompt);
  std::span<const double> logits(std::size_t prompt) const;
  std::span<double> parameters() noexcept { return logits_; }
  std::span<const double> parameters() const noexcept { return logits_; }

  /// Token length reported for completion v; 1 unless configured.
  int length(std::size_t v) const { return lengths_.at(v); }
  std::span<const int> lengths() const noexcept { return lengths_; }
  void set_lengths(std::vector<int> lengths);

  std::vector<double> log_probs(std::size_t prompt) const;
  /// Index of the most likely completion (lowest index on ties).
  std::size_t argmax(std::size_t prompt) const;

  bool operator==(const ToyPolicy&) const = default;

 private:
  std::size_t num_prompts_ = 0;
  std::size_t vocab_ = 0;
  std::vector<double> logits_;
  std::vector<int> lengths_;
};

struct ToyInit {
  ToyPolicy policy;
  /// Frozen copy of the initial policy.
  ToyPolicy reference;
};

/// Logits i.i.d. N(0, 1) from Rng(seed); reference is an exact copy.
ToyInit init_toy(std::size_t num_prompts, std::size_t vocab, std::uint64_t seed);

struct ToyPair {
  std::size_t prompt = 0;
  std::size_t preferred = 0;
  std::size_t dispreferred = 0;

  bool operator==(const ToyPair&) const = default;
};

/// Exact log-softmax evaluation of every pair under both policies. Throws
/// DataError for out-of-range prompts or completions.
LogProbBatch batch_logprobs(const ToyPolicy& policy, const ToyPolicy& reference,
                            std::span<const ToyPair> pairs);

/// Gradient of the mean loss with respect to every policy logit, chained
/// through the softmax Jacobian. `out`, when given, receives the loss output.
std::vector<double> logit_gradient(const ToyPolicy& policy, const ToyPolicy& reference,
                                   std::span<const ToyPair> pairs, const LossConfig& cfg,
                                   LossOutput* out = nullptr);

enum class Optimizer { SGD, Adam };
enum class Schedule { Constant, CosineWarmup };

std::string_view to_string(Optimizer o) noexcept;
Optimizer optimizer_from_string(std::string_view s);
std::string_view to_string(Schedule s) noexcept;
Schedule schedule_from_string(std::string_view s);

struct TrainConfig {
  LossConfig loss;
  double learning_rate = 0.05;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;
  Schedule schedule = Schedule::Constant;
  /// Fraction of steps spent in linear warmup under CosineWarmup.
  double warmup_fraction = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

/// Learning rate applied at 0-based step `step`.
double learning_rate_at(const TrainConfig& cfg, std::size_t step);

struct TrainStep {
  /// Number of updates applied before this row was measured.
  std::size_t step = 0;
  double loss = 0.0;
  BatchMetrics metrics;
};

struct TrainLog {
  /// steps + 1 rows: the initial state, then one row after every update.
  std::vector<TrainStep> steps;
  ToyPolicy final_policy;

  const TrainStep& initial() const { return steps.front(); }
  const TrainStep& final() const { return steps.back(); }

  /// Columns: step,loss,reward_margin,reward_accuracy,mean_lp_w,mean_hinge.
  std::string to_csv() const;
};

/// Full-batch deterministic training. Throws TrainingError with a snapshot
/// when the loss becomes non-finite.
TrainLog train(ToyPolicy policy, const ToyPolicy& reference, std::span<const ToyPair> pairs,
               const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Toy tasks

/// Latent rewards plus training pairs over a (prompt x completion) grid.
struct ToyTask {
  std::size_t num_prompts = 0;
  std::size_t vocab = 0;
  /// Row-major num_prompts x vocab latent rewards.
  std::vector<double> rewards;
  std::vector<ToyPair> pairs;
  std::vector<int> lengths;

  double reward(std::size_t prompt, std::size_t v) const { return rewards.at(prompt * vocab + v); }
};

/// The documented failure-mode instance: every prompt has the chain of
/// adjacent pairs 0>1, 1>2, ..., (V-2)>(V-1), with latent reward -v. Each
/// middle completion is preferred in one pair and dispreferred in the next,
/// so preferred and dispreferred completions draw on the same probability
/// mass.
ToyTask failure_mode_task(std::size_t num_prompts = 8, std::size_t vocab = 5);

struct SyntheticTaskOptions {
  std::size_t num_prompts = 32;
  std::size_t vocab = 5;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::IPR;
  /// Tie band of the simulated judge used for IPR / Copeland.
  double tie_band = 0.0;
  /// Noise of the scorer used for the Scoring strategy.
  double scorer_noise = 0.0;
};

/// Rewards N(0, 1); pairs are built with build_pairs over candidate texts
/// "p<i>:c<v>". Degenerate sets contribute no pair.
ToyTask synthetic_task(const SyntheticTaskOptions& options);

/// Maps text pairs onto candidate indices. Every set must have the same M,
/// which becomes the vocabulary. Rewards are read from `rewards` when it
/// covers the prompt, otherwise left at 0.
ToyTask task_from_pairs(std::span<const CandidateSet> sets, std::span<const PreferencePair> pairs,
                        const LatentRewardTable* rewards = nullptr);

/// Fraction of the task's prompts on which the trained policy's argmax
/// completion has strictly higher latent reward than the reference's argmax.
double winrate_proxy(const ToyPolicy& trained, const ToyPolicy& reference, const ToyTask& task);

/// Mean over pairs of max(0, lp_ref(y_w) - lp_policy(y_w) - delta).
double mean_budget_shortfall(const LogProbBatch& batch, double delta = 0.0);

// ---------------------------------------------------------------------------
// Hyperparameter sweeps

/// Empty axes fall back to the base config's value.
struct SweepGrid {
  std::vector<Method> methods;
  std::vector<double> learning_rates;
  std::vector<double> deltas;
  std::vector<double> lambdas;
  std::vector<double> betas;
  std::vector<std::size_t> steps;

  std::size_t size() const noexcept;
};

/// Reads {"method": [...], "lr": [...], "delta": [...], "lambda": [...],
/// "beta": [...], "steps": [...]}; every key is optional.
SweepGrid read_sweep_grid(const std::filesystem::path& path);

struct SweepRow {
  Method method = Method::DPO;
  double learning_rate = 0.0;
  double delta = 0.0;
  double lambda = 0.0;
  double beta = 0.0;
  std::size_t steps = 0;
  /// Final mean log-likelihood of preferred completions.
  double budget = 0.0;
  double winrate_proxy = 0.0;
  double reward_accuracy = 0.0;
  double final_loss = 0.0;
  double budget_shortfall = 0.0;
  std::string status = "ok";
};

/// One training run per grid point, all starting from init_toy(base.seed).
/// Failed runs are kept with their error in `status`. Rows follow grid
/// order (method-major) regardless of `threads`.
std::vector<SweepRow> sweep(const ToyTask& task, const TrainConfig& base, const SweepGrid& grid,
                            std::size_t threads = 1);

std::string to_csv(std::span<const SweepRow> rows);

}  // namespace prefopt
