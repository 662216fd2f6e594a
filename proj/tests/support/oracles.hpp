// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference implementations. Nothing here calls the code under
// test for the quantity it checks.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "prefopt/judge.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/prefdata.hpp"

namespace prefopt::testing {

inline CandidateSet make_set(const std::string& prompt_id, std::size_t m) {
  CandidateSet s{prompt_id, {}};
  for (std::size_t i = 0; i < m; ++i) s.candidates.push_back(prompt_id + "/c" + std::to_string(i));
  return s;
}

inline std::shared_ptr<LatentRewardTable> make_table(const std::string& prompt_id,
                                                     const std::vector<double>& rewards,
                                                     double tie_band = 0.0) {
  auto t = std::make_shared<LatentRewardTable>(tie_band);
  t->set_all(prompt_id, rewards);
  return t;
}

/// A random permutation of 0..m-1 plus jitter; all entries distinct.
inline std::vector<double> distinct_rewards(std::size_t m, Rng& rng) {
  std::vector<double> r(m);
  std::iota(r.begin(), r.end(), 0.0);
  std::shuffle(r.begin(), r.end(), rng);
  std::uniform_real_distribution<double> jitter(0.0, 0.5);
  for (double& x : r) x += jitter(rng);
  return r;
}

inline std::size_t latent_argmax(const std::vector<double>& r) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i] > r[best]) best = i;
  return best;
}

inline std::size_t latent_argmin(const std::vector<double>& r) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i] < r[best]) best = i;
  return best;
}

/// Copeland winner counted straight from the rewards.
inline std::size_t brute_copeland(const std::vector<double>& r, double eps) {
  std::vector<int> wins(r.size(), 0);
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r.size(); ++j)
      if (i != j && r[i] > r[j] + eps) ++wins[i];
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.size(); ++i)
    if (wins[i] > wins[best]) best = i;
  return best;
}

// ---------------------------------------------------------------------------
// Judges for driving the tournaments

class FnJudge final : public Judge {
 public:
  explicit FnJudge(std::function<Verdict(const CompareRequest&)> fn) : fn_(std::move(fn)) {}
  std::string id() const override { return "fn"; }
  ComparisonOutcome compare(const CompareRequest& req) override {
    ++calls;
    return ComparisonOutcome{fn_(req), req.baseline_index, req.candidate_index, "fn", std::nullopt};
  }
  std::atomic<std::size_t> calls{0};

 private:
  std::function<Verdict(const CompareRequest&)> fn_;
};

class CountingJudge final : public Judge {
 public:
  explicit CountingJudge(std::shared_ptr<Judge> inner) : inner_(std::move(inner)) {}
  std::string id() const override { return inner_->id(); }
  ComparisonOutcome compare(const CompareRequest& req) override {
    ++calls;
    return inner_->compare(req);
  }
  std::atomic<std::size_t> calls{0};

 private:
  std::shared_ptr<Judge> inner_;
};

// ---------------------------------------------------------------------------
// Scalar loss oracle in long double, written from the formulas directly.

inline long double ld_softplus(long double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Row with long-double log-probs, for oracles that must not round to double.
struct LdRow {
  long double lp_w_policy = 0, lp_w_ref = 0, lp_l_policy = 0, lp_l_ref = 0;
  int len_w = 1, len_l = 1;
};

template <class Row>
long double oracle_row_loss(const Row& r, const LossConfig& c) {
  using ld = long double;
  const ld wp = r.lp_w_policy, wr = r.lp_w_ref, lp = r.lp_l_policy, lr = r.lp_l_ref;
  const ld beta = c.beta.value_or(0), tau = c.tau.value_or(1), gamma = c.gamma.value_or(0);
  const ld lambda = c.lambda.value_or(0), delta = c.delta.value_or(0);
  const ld dpo_z = beta * (wp - wr) - beta * (lp - lr);
  const ld simpo_z = beta * wp / r.len_w - beta * lp / r.len_l - gamma;
  const ld ipo_h = (wp - wr) - (lp - lr) - 1 / (2 * tau);
  const ld budget = std::max<ld>(0, (wr - wp) - delta);
  switch (c.method) {
    case Method::DPO: return ld_softplus(-dpo_z);
    case Method::DPOP: return ld_softplus(-(dpo_z - lambda * std::max<ld>(0, wr - wp)));
    case Method::DPO_BCR: return ld_softplus(-dpo_z) + lambda * budget;
    case Method::IPO: return ipo_h * ipo_h;
    case Method::IPO_BCR: return ipo_h * ipo_h + lambda * budget;
    case Method::SimPO: return ld_softplus(-simpo_z);
    case Method::SimPO_BCR:
      return ld_softplus(-simpo_z) + lambda * std::max<ld>(0, -wp / r.len_w - delta);
    case Method::CPO: return ld_softplus(-simpo_z) - lambda / r.len_w * wp;
  }
  return 0;
}

inline long double oracle_loss(const LogProbBatch& b, const LossConfig& c) {
  long double s = 0;
  for (const auto& r : b) s += oracle_row_loss(r, c);
  return s / static_cast<long double>(b.size());
}

struct OracleMetrics {
  double margin = 0, accuracy = 0, mean_lp_w = 0, mean_hinge = 0;
};

inline OracleMetrics oracle_metrics(const LogProbBatch& b, const LossConfig& c) {
  const bool ref_free = c.method == Method::SimPO || c.method == Method::CPO || c.method == Method::SimPO_BCR;
  const long double beta = c.beta.value_or(1.0);
  long double margin = 0, lpw = 0, hinge = 0;
  int correct = 0;
  for (const auto& r : b) {
    const long double rw = ref_free ? beta * r.lp_w_policy / r.len_w : beta * ((long double)r.lp_w_policy - r.lp_w_ref);
    const long double rl = ref_free ? beta * r.lp_l_policy / r.len_l : beta * ((long double)r.lp_l_policy - r.lp_l_ref);
    margin += rw - rl;
    correct += rw - rl > 0 ? 1 : 0;
    lpw += r.lp_w_policy;
    const long double d = c.delta.value_or(0);
    switch (c.method) {
      case Method::DPOP: hinge += std::max<long double>(0, (long double)r.lp_w_ref - r.lp_w_policy); break;
      case Method::DPO_BCR:
      case Method::IPO_BCR: hinge += std::max<long double>(0, (long double)r.lp_w_ref - r.lp_w_policy - d); break;
      case Method::SimPO_BCR: hinge += std::max<long double>(0, -(long double)r.lp_w_policy / r.len_w - d); break;
      default: break;
    }
  }
  const long double n = b.size();
  return {double(margin / n), double(correct / n), double(lpw / n), double(hinge / n)};
}

inline std::vector<long double> ld_log_softmax(std::span<const double> z) {
  long double mx = *std::max_element(z.begin(), z.end());
  long double s = 0;
  for (double x : z) s += std::exp((long double)x - mx);
  std::vector<long double> out;
  for (double x : z) out.push_back((long double)x - mx - std::log(s));
  return out;
}

// ---------------------------------------------------------------------------
// Random draws from the usual hyperparameter grids

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::DPO,  Method::IPO,     Method::SimPO,   Method::CPO,
                                     Method::DPOP, Method::DPO_BCR, Method::IPO_BCR, Method::SimPO_BCR};
  return m;
}

template <class T>
T pick(const std::vector<T>& v, Rng& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

inline LossConfig random_config(Method m, Rng& rng) {
  LossConfig c;
  c.method = m;
  const std::vector<double> taus{0.01, 0.1, 1.0}, gammas{0.1, 0.5}, lambdas{0.1, 0.2, 0.5, 1.0},
      deltas{1, 2, 4, 6, 8};
  std::uniform_real_distribution<double> dpo_beta(0.01, 0.1), simpo_beta(2.5, 10.0);
  const bool ref_free = is_reference_free(m);
  if (m != Method::IPO && m != Method::IPO_BCR) c.beta = ref_free ? simpo_beta(rng) : dpo_beta(rng);
  if (m == Method::IPO || m == Method::IPO_BCR) c.tau = pick(taus, rng);
  if (ref_free) c.gamma = pick(gammas, rng);
  if (m == Method::CPO || m == Method::DPOP || m == Method::DPO_BCR || m == Method::IPO_BCR ||
      m == Method::SimPO_BCR)
    c.lambda = pick(lambdas, rng);
  if (m == Method::DPO_BCR || m == Method::IPO_BCR || m == Method::SimPO_BCR) c.delta = pick(deltas, rng);
  return c;
}

/// Sequence log-probs in [-60, -10] with log-ratios in [-10, 3]. For the
/// length-normalized methods, per-token means in [-3, -0.3] with w/l means
/// within 0.6 of each other, so beta * gap stays in a few units.
inline LogProbBatch random_batch(std::size_t n, bool reference_free, Rng& rng) {
  std::uniform_real_distribution<double> ref(-60.0, -10.0), ratio(-10.0, 3.0), mean_w(-3.0, -0.3),
      spread(-0.6, 0.6);
  std::uniform_int_distribution<int> len(1, 20);
  LogProbBatch b(n);
  for (auto& r : b) {
    r.len_w = len(rng);
    r.len_l = len(rng);
    r.lp_w_ref = ref(rng);
    r.lp_l_ref = ref(rng);
    if (reference_free) {
      const double mw = mean_w(rng);
      const double ml = std::min(-0.01, mw + spread(rng));
      r.lp_w_policy = mw * r.len_w;
      r.lp_l_policy = ml * r.len_l;
    } else {
      r.lp_w_policy = r.lp_w_ref + ratio(rng);
      r.lp_l_policy = r.lp_l_ref + ratio(rng);
    }
  }
  return b;
}

}  // namespace prefopt::testing
