// SPDX-License-Identifier: Apache-2.0
#include "prefopt/judge.hpp"

#include <charconv>
#include <cmath>

#include "jsonl_io.hpp"
#include "prefopt/error.hpp"

namespace prefopt {

using detail::json;

CompareRequest swapped(const CompareRequest& req) noexcept {
  return CompareRequest{req.prompt_id,       req.prompt,   req.candidate_index,
                        req.candidate,       req.baseline_index, req.baseline};
}

ComparisonOutcome symmetrized_compare(Judge& judge, const CompareRequest& req) {
  ComparisonOutcome forward = judge.compare(req);
  ComparisonOutcome backward = judge.compare(swapped(req));
  // Express the swapped verdict in the forward orientation.
  const Verdict backward_as_forward = mirror(backward.verdict);

  ComparisonOutcome out = forward;
  out.verdict = forward.verdict == backward_as_forward ? forward.verdict : Verdict::Tie;
  std::string evidence = "forward=" + std::string(to_string(forward.verdict)) +
                         " swapped=" + std::string(to_string(backward.verdict));
  if (forward.raw_evidence) evidence += "\n--- forward ---\n" + *forward.raw_evidence;
  if (backward.raw_evidence) evidence += "\n--- swapped ---\n" + *backward.raw_evidence;
  out.raw_evidence = std::move(evidence);
  return out;
}

SymmetrizedJudge::SymmetrizedJudge(std::shared_ptr<Judge> inner) : inner_(std::move(inner)) {
  if (!inner_) throw ConfigError("SymmetrizedJudge needs an inner judge");
}

std::string SymmetrizedJudge::id() const { return inner_->id() + "+sym"; }

ComparisonOutcome SymmetrizedJudge::compare(const CompareRequest& req) {
  ComparisonOutcome out = symmetrized_compare(*inner_, req);
  out.judge_id = id();
  return out;
}

// ---------------------------------------------------------------------------

LatentRewardTable::LatentRewardTable(double tie_band) { set_tie_band(tie_band); }

void LatentRewardTable::set_tie_band(double tie_band) {
  if (!(tie_band >= 0.0) || !std::isfinite(tie_band))
    throw ConfigError("tie band must be a finite non-negative number");
  tie_band_ = tie_band;
}

void LatentRewardTable::set(std::string_view prompt_id, std::size_t index, double reward) {
  if (!std::isfinite(reward)) throw DataError("latent reward must be finite");
  rewards_[{std::string(prompt_id), index}] = reward;
}

void LatentRewardTable::set_all(std::string_view prompt_id, std::span<const double> rewards) {
  for (std::size_t i = 0; i < rewards.size(); ++i) set(prompt_id, i, rewards[i]);
}

bool LatentRewardTable::contains(std::string_view prompt_id, std::size_t index) const {
  return rewards_.find(std::pair{std::string(prompt_id), index}) != rewards_.end();
}

double LatentRewardTable::at(std::string_view prompt_id, std::size_t index) const {
  auto it = rewards_.find(std::pair{std::string(prompt_id), index});
  if (it == rewards_.end())
    throw JudgeError("no latent reward for prompt \"" + std::string(prompt_id) + "\" candidate " +
                     std::to_string(index));
  return it->second;
}

std::vector<double> LatentRewardTable::rewards_for(std::string_view prompt_id) const {
  std::vector<double> out;
  auto it = rewards_.lower_bound(std::pair{std::string(prompt_id), std::size_t{0}});
  for (; it != rewards_.end() && it->first.first == prompt_id; ++it) {
    if (it->first.second != out.size()) break;
    out.push_back(it->second);
  }
  return out;
}

LatentRewardTable read_reward_table(const std::filesystem::path& path, double tie_band) {
  LatentRewardTable table(tie_band);
  detail::for_each_line(path, [&](std::string_view line, std::size_t) {
    json j = detail::parse_object(line);
    std::string id = detail::require_string(j, "prompt_id");
    const json& r = detail::require(j, "rewards");
    if (!r.is_array()) throw DataError("field \"rewards\" must be an array");
    std::vector<double> values;
    for (const auto& x : r) {
      if (!x.is_number()) throw DataError("rewards must be numbers");
      values.push_back(x.get<double>());
    }
    table.set_all(id, values);
  });
  return table;
}

void write_reward_table(const LatentRewardTable& table, std::span<const std::string> prompt_ids,
                        const std::filesystem::path& path) {
  std::string body;
  for (const auto& id : prompt_ids) {
    body += json{{"prompt_id", id}, {"rewards", table.rewards_for(id)}}.dump();
    body += '\n';
  }
  detail::write_text(path, body);
}

namespace {

std::string format_gap(double gap) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), gap);
  return "reward_gap=" + std::string(buf, res.ptr);
}

}  // namespace

ComparisonOutcome simulated_compare(const LatentRewardTable& table, std::string_view prompt_id,
                                    std::size_t baseline_index, std::size_t candidate_index) {
  if (baseline_index == candidate_index)
    throw JudgeError("cannot compare candidate " + std::to_string(baseline_index) +
                     " with itself");
  const double rb = table.at(prompt_id, baseline_index);
  const double rc = table.at(prompt_id, candidate_index);
  const double eps = table.tie_band();

  ComparisonOutcome out;
  out.baseline_index = baseline_index;
  out.candidate_index = candidate_index;
  out.judge_id = "simulated";
  if (rb > rc + eps) {
    out.verdict = Verdict::BaselineWins;
  } else if (rc > rb + eps) {
    out.verdict = Verdict::CandidateWins;
  } else {
    out.verdict = Verdict::Tie;
  }
  out.raw_evidence = format_gap(rc - rb);
  return out;
}

SimulatedJudge::SimulatedJudge(std::shared_ptr<const LatentRewardTable> table)
    : table_(std::move(table)) {
  if (!table_) throw ConfigError("SimulatedJudge needs a reward table");
}

ComparisonOutcome SimulatedJudge::compare(const CompareRequest& req) {
  return simulated_compare(*table_, req.prompt_id, req.baseline_index, req.candidate_index);
}

// ---------------------------------------------------------------------------

void ScorerConfig::validate() const {
  if (!table) throw ConfigError("scorer has no reward table");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ConfigError("noise_sigma must be a finite non-negative number");
}

double score(const ScorerConfig& config, const ScoreRequest& req, Rng& rng) {
  config.validate();
  const double r = config.table->at(req.prompt_id, req.candidate_index);
  if (config.noise_sigma == 0.0) return r;
  std::normal_distribution<double> noise(0.0, config.noise_sigma);
  return r + noise(rng);
}

TableScorer::TableScorer(ScorerConfig config) : config_(std::move(config)) { config_.validate(); }

std::string TableScorer::id() const {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), config_.noise_sigma);
  return "table(sigma=" + std::string(buf, res.ptr) + ")";
}

double TableScorer::score(const ScoreRequest& req, Rng& rng) {
  return prefopt::score(config_, req, rng);
}

}  // namespace prefopt
