// SPDX-License-Identifier: Apache-2.0
#include "prefopt/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "prefopt/error.hpp"

namespace prefopt {

namespace {

double pct(std::size_t k, std::size_t n) {
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(k) / static_cast<double>(n);
}

}  // namespace

double AgreementResult::agreement_pct() const noexcept { return pct(agree, n); }
double AgreementResult::tie_pct() const noexcept { return pct(ties, n); }
double AgreementResult::disagreement_pct() const noexcept { return pct(disagree, n); }

AgreementResult agreement(std::span<const PreferencePair> pairs,
                          std::span<const CandidateSet> candidate_sets, Judge& judge,
                          const AgreementOptions& options) {
  if (pairs.empty()) throw DataError("no preference pairs to evaluate");

  std::unordered_map<std::string_view, const CandidateSet*> sets;
  for (const auto& s : candidate_sets) sets.emplace(s.prompt_id, &s);

  std::vector<std::optional<Verdict>> verdicts(pairs.size());
  std::vector<std::string> errors(pairs.size());
  std::atomic<std::size_t> next{0};

  auto judge_one = [&](const PreferencePair& pair) {
    auto it = sets.find(pair.prompt_id);
    if (it == sets.end()) throw DataError("no candidate set for prompt \"" + pair.prompt_id + "\"");
    const auto& c = it->second->candidates;
    auto index_of = [&](const std::string& text) {
      auto pos = std::find(c.begin(), c.end(), text);
      if (pos == c.end())
        throw DataError("completion not found among candidates of \"" + pair.prompt_id + "\"");
      return static_cast<std::size_t>(std::distance(c.begin(), pos));
    };
    const CompareRequest req{pair.prompt_id, pair.prompt, index_of(pair.dispreferred),
                             pair.dispreferred, index_of(pair.preferred), pair.preferred};
    return options.symmetrize ? symmetrized_compare(judge, req).verdict : judge.compare(req).verdict;
  };

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pairs.size()) return;
      try {
        verdicts[i] = judge_one(pairs[i]);
      } catch (const std::exception& e) {
        errors[i] = pairs[i].prompt_id + ": " + e.what();
        spdlog::warn("agreement: {}", errors[i]);
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.max_in_flight, 1, pairs.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  AgreementResult r;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!verdicts[i]) {
      ++r.failures;
      r.failure_messages.push_back(std::move(errors[i]));
      continue;
    }
    ++r.n;
    switch (*verdicts[i]) {
      case Verdict::CandidateWins: ++r.agree; break;
      case Verdict::Tie: ++r.ties; break;
      case Verdict::BaselineWins: ++r.disagree; break;
    }
  }
  if (r.n == 0) throw JudgeError("no judged pairs");
  return r;
}

std::vector<StrategyRow> compare_strategies(std::span<const PromptRecord> prompts,
                                            std::span<const CandidateSet> candidate_sets,
                                            Judge& eval_judge,
                                            std::span<const StrategyConfig> configs,
                                            const AgreementOptions& options) {
  std::vector<StrategyRow> rows;
  rows.reserve(configs.size());
  for (const auto& cfg : configs) {
    StrategyRow row;
    row.label = cfg.label;
    try {
      const BuildReport report = build_pairs(prompts, candidate_sets, cfg.options, cfg.judge, cfg.scorer);
      const auto pairs = report.pairs();
      row.pairs_built = pairs.size();
      row.skipped = report.skipped();
      row.result = agreement(pairs, candidate_sets, eval_judge, options);
    } catch (const std::exception& e) {
      row.error = e.what();
      spdlog::error("strategy {}: {}", cfg.label, e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_csv(std::span<const StrategyRow> rows) {
  std::string out = "strategy,n,agreement_pct,tie_pct,disagreement_pct\n";
  for (const auto& r : rows) {
    if (r.error) {
      out += r.label + ",0,,,\n";
      continue;
    }
    out += fmt::format("{},{},{},{},{}\n", r.label, r.result.n, r.result.agreement_pct(),
                       r.result.tie_pct(), r.result.disagreement_pct());
  }
  return out;
}

}  // namespace prefopt
