// SPDX-License-Identifier: Apache-2.0
//
// Preference-optimization objectives over sequence log-likelihoods, with
// analytic gradients.
//
// Notation: r_w = beta * (lp_w_policy - lp_w_ref), r_l likewise. Every loss
// is computed per example and mean-reduced over the batch; gradients are of
// that mean. Hinge subgradients at the kink are 0.
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prefopt {

/// One preference example. Log-probs are token sums.
struct LogProbRow {
  double lp_w_policy = 0.0;
  double lp_w_ref = 0.0;
  double lp_l_policy = 0.0;
  double lp_l_ref = 0.0;
  int len_w = 1;
  int len_l = 1;

  bool operator==(const LogProbRow&) const = default;
};

using LogProbBatch = std::vector<LogProbRow>;

/// Throws DataError on an empty batch, non-finite values, positive log-probs
/// or lengths < 1.
void validate(std::span<const LogProbRow> batch);

enum class Method { DPO, IPO, SimPO, CPO, DPOP, DPO_BCR, IPO_BCR, SimPO_BCR };

std::string_view to_string(Method m) noexcept;
/// Accepts "dpo", "ipo", "simpo", "cpo", "dpop", "dpo_bcr"/"dpo-bcr", ...
Method method_from_string(std::string_view s);

/// True for methods whose reward is the length-normalized policy log-prob.
bool is_reference_free(Method m) noexcept;

struct LossConfig {
  Method method = Method::DPO;
  std::optional<double> beta;
  std::optional<double> tau;
  std::optional<double> gamma;
  std::optional<double> lambda;
  std::optional<double> delta;

  /// Throws ConfigError when a field the method reads is missing or out of
  /// range (beta > 0, tau > 0, gamma/lambda/delta >= 0).
  void validate() const;
};

struct BatchMetrics {
  double reward_margin = 0.0;
  /// Fraction with r_w > r_l strictly.
  double reward_accuracy = 0.0;
  double mean_lp_w = 0.0;
  /// Mean of the method's hinge term (before lambda); 0 for hinge-free methods.
  double mean_hinge = 0.0;

  bool operator==(const BatchMetrics&) const = default;
};

struct LossOutput {
  double loss = 0.0;
  std::vector<double> grad_lp_w;
  std::vector<double> grad_lp_l;
  BatchMetrics metrics;
};

LossOutput dpo_loss(std::span<const LogProbRow> batch, const LossConfig& cfg);
LossOutput dpop_loss(std::span<const LogProbRow> batch, const LossConfig& cfg);
LossOutput dpo_bcr_loss(std::span<const LogProbRow> batch, const LossConfig& cfg);
LossOutput ipo_loss(std::span<const LogProbRow> batch, const LossConfig& cfg);
LossOutput ipo_bcr_loss(std::span<const LogProbRow> batch, const LossConfig& cfg);
LossOutput simpo_loss(std::span<const LogProbRow> batch, const LossConfig& cfg);
LossOutput simpo_bcr_loss(std::span<const LogProbRow> batch, const LossConfig& cfg);
LossOutput cpo_loss(std::span<const LogProbRow> batch, const LossConfig& cfg);

/// Dispatches on cfg.method.
LossOutput compute_loss(std::span<const LogProbRow> batch, const LossConfig& cfg);

/// Reward margin, accuracy, mean lp_w and mean hinge for cfg.method's reward
/// parameterization (beta-scaled log-ratio, or beta * lp / len for the
/// reference-free methods; IPO uses beta = 1 when unset).
BatchMetrics compute_metrics(std::span<const LogProbRow> batch, const LossConfig& cfg);

/// Argument of the method's hinge for one row (the term inside max(0, .)),
/// or nullopt for hinge-free methods.
std::optional<double> hinge_argument(const LogProbRow& row, const LossConfig& cfg);

using LossFn = std::function<LossOutput(std::span<const LogProbRow>, const LossConfig&)>;

/// Central differences on every lp_w_policy / lp_l_policy coordinate against
/// the analytic gradients of `loss_fn`; returns the max relative error
/// |a - n| / max(|a|, |n|). Coordinates whose hinge argument is within 10h of
/// the kink are skipped. h must lie in [1e-6, 1e-4].
///
/// The losses are separable over rows, so each coordinate is differenced on
/// its own one-row batch and rescaled by 1/n; this keeps the other rows'
/// loss out of the cancellation error.
double finite_diff_check(const LossFn& loss_fn, std::span<const LogProbRow> batch,
                         const LossConfig& cfg, double h);

}  // namespace prefopt
