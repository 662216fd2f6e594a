// SPDX-License-Identifier: Apache-2.0
#include "prefopt/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "prefopt/error.hpp"

namespace prefopt {

ToyPolicy::ToyPolicy(std::size_t num_prompts, std::size_t vocab)
    : num_prompts_(num_prompts), vocab_(vocab), logits_(num_prompts * vocab, 0.0), lengths_(vocab, 1) {
  if (vocab < 2) throw ConfigError("vocabulary needs at least 2 completions");
}

std::span<double> ToyPolicy::logits(std::size_t prompt) {
  if (prompt >= num_prompts_) throw DataError("prompt index " + std::to_string(prompt) + " out of range");
  return std::span<double>(logits_).subspan(prompt * vocab_, vocab_);
}

std::span<const double> ToyPolicy::logits(std::size_t prompt) const {
  if (prompt >= num_prompts_) throw DataError("prompt index " + std::to_string(prompt) + " out of range");
  return std::span<const double>(logits_).subspan(prompt * vocab_, vocab_);
}

void ToyPolicy::set_lengths(std::vector<int> lengths) {
  if (lengths.size() != vocab_) throw ConfigError("need one length per completion");
  for (int l : lengths)
    if (l < 1) throw ConfigError("completion lengths must be >= 1");
  lengths_ = std::move(lengths);
}

std::vector<double> ToyPolicy::log_probs(std::size_t prompt) const {
  const auto z = logits(prompt);
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - mx);
  const double log_norm = mx + std::log(sum);
  std::vector<double> out(z.size());
  for (std::size_t v = 0; v < z.size(); ++v) out[v] = z[v] - log_norm;
  return out;
}

std::size_t ToyPolicy::argmax(std::size_t prompt) const {
  const auto z = logits(prompt);
  return static_cast<std::size_t>(std::distance(z.begin(), std::max_element(z.begin(), z.end())));
}

ToyInit init_toy(std::size_t num_prompts, std::size_t vocab, std::uint64_t seed) {
  if (num_prompts == 0) throw ConfigError("need at least one prompt");
  ToyPolicy policy(num_prompts, vocab);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : policy.parameters()) x = normal(rng);
  return {policy, policy};
}

LogProbBatch batch_logprobs(const ToyPolicy& policy, const ToyPolicy& reference,
                            std::span<const ToyPair> pairs) {
  if (policy.num_prompts() != reference.num_prompts() || policy.vocab() != reference.vocab())
    throw DataError("policy and reference shapes differ");
  std::unordered_map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> cache;
  LogProbBatch batch;
  batch.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.prompt >= policy.num_prompts())
      throw DataError("pair refers to unknown prompt " + std::to_string(p.prompt));
    if (p.preferred >= policy.vocab() || p.dispreferred >= policy.vocab())
      throw DataError("pair refers to a completion outside the vocabulary");
    auto it = cache.find(p.prompt);
    if (it == cache.end())
      it = cache.emplace(p.prompt, std::pair{policy.log_probs(p.prompt), reference.log_probs(p.prompt)}).first;
    const auto& [pol, ref] = it->second;
    batch.push_back(LogProbRow{pol[p.preferred], ref[p.preferred], pol[p.dispreferred],
                               ref[p.dispreferred], policy.length(p.preferred),
                               policy.length(p.dispreferred)});
  }
  return batch;
}

std::vector<double> logit_gradient(const ToyPolicy& policy, const ToyPolicy& reference,
                                   std::span<const ToyPair> pairs, const LossConfig& cfg,
                                   LossOutput* out) {
  const LogProbBatch batch = batch_logprobs(policy, reference, pairs);
  LossOutput loss = compute_loss(batch, cfg);

  const std::size_t vocab = policy.vocab();
  std::vector<double> grad(policy.parameters().size(), 0.0);
  std::unordered_map<std::size_t, std::vector<double>> probs;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    auto it = probs.find(p.prompt);
    if (it == probs.end()) {
      auto lp = policy.log_probs(p.prompt);
      for (double& x : lp) x = std::exp(x);
      it = probs.emplace(p.prompt, std::move(lp)).first;
    }
    const auto& pi = it->second;
    // d log pi(u) / d logit_k = [u == k] - pi_k
    const double gw = loss.grad_lp_w[i];
    const double gl = loss.grad_lp_l[i];
    double* g = grad.data() + p.prompt * vocab;
    for (std::size_t k = 0; k < vocab; ++k) g[k] -= (gw + gl) * pi[k];
    g[p.preferred] += gw;
    g[p.dispreferred] += gl;
  }
  if (out) *out = std::move(loss);
  return grad;
}

std::string_view to_string(Optimizer o) noexcept { return o == Optimizer::SGD ? "sgd" : "adam"; }

Optimizer optimizer_from_string(std::string_view s) {
  if (s == "sgd") return Optimizer::SGD;
  if (s == "adam") return Optimizer::Adam;
  throw ConfigError("unknown optimizer \"" + std::string(s) + "\"");
}

std::string_view to_string(Schedule s) noexcept {
  return s == Schedule::Constant ? "constant" : "cosine";
}

Schedule schedule_from_string(std::string_view s) {
  if (s == "constant") return Schedule::Constant;
  if (s == "cosine") return Schedule::CosineWarmup;
  throw ConfigError("unknown schedule \"" + std::string(s) + "\"");
}

void TrainConfig::validate() const {
  loss.validate();
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be a finite value >= 0");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
    throw ConfigError("warmup fraction must lie in [0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be > 0");
}

double learning_rate_at(const TrainConfig& cfg, std::size_t step) {
  if (cfg.schedule == Schedule::Constant) return cfg.learning_rate;
  const auto warmup = static_cast<std::size_t>(cfg.warmup_fraction * static_cast<double>(cfg.steps));
  if (step < warmup)
    return cfg.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const double span = static_cast<double>(std::max<std::size_t>(1, cfg.steps - warmup));
  const double progress = std::min(1.0, static_cast<double>(step - warmup) / span);
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::string TrainLog::to_csv() const {
  std::string out = "step,loss,reward_margin,reward_accuracy,mean_lp_w,mean_hinge\n";
  for (const auto& s : steps) {
    out += fmt::format("{},{},{},{},{},{}\n", s.step, s.loss, s.metrics.reward_margin,
                       s.metrics.reward_accuracy, s.metrics.mean_lp_w, s.metrics.mean_hinge);
  }
  return out;
}

TrainLog train(ToyPolicy policy, const ToyPolicy& reference, std::span<const ToyPair> pairs,
               const TrainConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw DataError("no training pairs");

  const std::size_t dim = policy.parameters().size();
  std::vector<double> m(dim, 0.0), v(dim, 0.0);
  TrainLog log;
  log.steps.reserve(cfg.steps + 1);

  for (std::size_t step = 0;; ++step) {
    LossOutput out;
    std::vector<double> grad;
    try {
      grad = logit_gradient(policy, reference, pairs, cfg.loss, &out);
    } catch (const DataError& e) {
      if (step == 0) throw;
      const TrainStep& last = log.steps.back();
      throw TrainingError(fmt::format("diverged at step {} ({}; method {}, lr {}, last loss {}, mean_lp_w {})", step,
                                      e.what(), to_string(cfg.loss.method), learning_rate_at(cfg, step - 1),
                                      last.loss, last.metrics.mean_lp_w));
    }
    log.steps.push_back(TrainStep{step, out.loss, out.metrics});
    if (step == cfg.steps) break;

    const double lr = learning_rate_at(cfg, step);
    auto theta = policy.parameters();
    if (cfg.optimizer == Optimizer::SGD) {
      for (std::size_t k = 0; k < dim; ++k) theta[k] -= lr * grad[k];
    } else {
      const double t = static_cast<double>(step + 1);
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
      for (std::size_t k = 0; k < dim; ++k) {
        m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * grad[k];
        v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * grad[k] * grad[k];
        theta[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.adam_eps);
      }
    }

    const bool finite = std::all_of(theta.begin(), theta.end(), [](double x) { return std::isfinite(x); });
    if (!finite) {
      double worst = 0.0;
      for (double g : grad) worst = std::max(worst, std::abs(g));
      throw TrainingError(fmt::format(
          "non-finite parameters after step {} (method {}, lr {}, last loss {}, max |grad| {}, "
          "mean_lp_w {})",
          step + 1, to_string(cfg.loss.method), lr, out.loss, worst, out.metrics.mean_lp_w));
    }
  }
  log.final_policy = std::move(policy);
  return log;
}

// ---------------------------------------------------------------------------

ToyTask failure_mode_task(std::size_t num_prompts, std::size_t vocab) {
  if (vocab < 2 || num_prompts == 0) throw ConfigError("failure-mode task needs P >= 1 and V >= 2");
  ToyTask task;
  task.num_prompts = num_prompts;
  task.vocab = vocab;
  task.lengths.assign(vocab, 1);
  task.rewards.resize(num_prompts * vocab);
  for (std::size_t p = 0; p < num_prompts; ++p) {
    for (std::size_t v = 0; v < vocab; ++v) task.rewards[p * vocab + v] = -static_cast<double>(v);
    for (std::size_t v = 0; v + 1 < vocab; ++v) task.pairs.push_back(ToyPair{p, v, v + 1});
  }
  return task;
}

ToyTask synthetic_task(const SyntheticTaskOptions& options) {
  if (options.num_prompts == 0 || options.vocab < 2)
    throw ConfigError("synthetic task needs at least one prompt and two completions");
  Rng rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto table = std::make_shared<LatentRewardTable>(options.tie_band);
  std::vector<PromptRecord> prompts;
  std::vector<CandidateSet> sets;
  ToyTask task;
  task.num_prompts = options.num_prompts;
  task.vocab = options.vocab;
  task.lengths.assign(options.vocab, 1);
  task.rewards.resize(options.num_prompts * options.vocab);
  for (std::size_t p = 0; p < options.num_prompts; ++p) {
    const std::string id = "p" + std::to_string(p);
    prompts.push_back(PromptRecord{id, "prompt " + std::to_string(p)});
    CandidateSet set{id, {}};
    for (std::size_t v = 0; v < options.vocab; ++v) {
      const double r = normal(rng);
      task.rewards[p * options.vocab + v] = r;
      table->set(id, v, r);
      set.candidates.push_back(id + ":c" + std::to_string(v));
    }
    sets.push_back(std::move(set));
  }

  BuildOptions build;
  build.strategy = options.strategy;
  build.seed = options.seed;
  SimulatedJudge judge(table);
  TableScorer scorer(ScorerConfig{table, options.scorer_noise});
  const BuildReport report = build_pairs(prompts, sets, build, &judge, &scorer);

  for (std::size_t p = 0; p < report.entries.size(); ++p) {
    const auto& e = report.entries[p];
    if (!e.pair) continue;
    const auto& c = sets[p].candidates;
    auto index_of = [&](const std::string& text) {
      return static_cast<std::size_t>(std::distance(c.begin(), std::find(c.begin(), c.end(), text)));
    };
    task.pairs.push_back(ToyPair{p, index_of(e.pair->preferred), index_of(e.pair->dispreferred)});
  }
  return task;
}

ToyTask task_from_pairs(std::span<const CandidateSet> sets, std::span<const PreferencePair> pairs,
                        const LatentRewardTable* rewards) {
  if (sets.empty()) throw DataError("no candidate sets");
  ToyTask task;
  task.num_prompts = sets.size();
  task.vocab = sets.front().size();
  task.lengths.assign(task.vocab, 1);
  task.rewards.assign(task.num_prompts * task.vocab, 0.0);

  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t p = 0; p < sets.size(); ++p) {
    validate(sets[p]);
    if (sets[p].size() != task.vocab)
      throw DataError("candidate sets must all have the same size for toy training");
    if (!index.emplace(sets[p].prompt_id, p).second)
      throw DataError("duplicate candidate set for prompt \"" + sets[p].prompt_id + "\"");
    if (rewards) {
      for (std::size_t v = 0; v < task.vocab; ++v)
        if (rewards->contains(sets[p].prompt_id, v))
          task.rewards[p * task.vocab + v] = rewards->at(sets[p].prompt_id, v);
    }
  }

  for (const auto& pair : pairs) {
    auto it = index.find(pair.prompt_id);
    if (it == index.end())
      throw DataError("pair refers to unknown prompt \"" + pair.prompt_id + "\"");
    const auto& c = sets[it->second].candidates;
    auto find = [&](const std::string& text) {
      auto pos = std::find(c.begin(), c.end(), text);
      if (pos == c.end())
        throw DataError("pair completion not found among candidates of \"" + pair.prompt_id + "\"");
      return static_cast<std::size_t>(std::distance(c.begin(), pos));
    };
    task.pairs.push_back(ToyPair{it->second, find(pair.preferred), find(pair.dispreferred)});
  }
  return task;
}

double winrate_proxy(const ToyPolicy& trained, const ToyPolicy& reference, const ToyTask& task) {
  if (task.num_prompts == 0) return 0.0;
  std::size_t wins = 0;
  for (std::size_t p = 0; p < task.num_prompts; ++p)
    if (task.reward(p, trained.argmax(p)) > task.reward(p, reference.argmax(p))) ++wins;
  return static_cast<double>(wins) / static_cast<double>(task.num_prompts);
}

double mean_budget_shortfall(const LogProbBatch& batch, double delta) {
  if (batch.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : batch) sum += std::max(0.0, r.lp_w_ref - r.lp_w_policy - delta);
  return sum / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------

std::size_t SweepGrid::size() const noexcept {
  auto n = [](std::size_t s) { return std::max<std::size_t>(s, 1); };
  return n(methods.size()) * n(learning_rates.size()) * n(deltas.size()) * n(lambdas.size()) *
         n(betas.size()) * n(steps.size());
}

SweepGrid read_sweep_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sweep grid " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw DataError(path.string() + ": grid must be a JSON object");

  static const std::vector<std::string> known{"method", "lr", "delta", "lambda", "beta", "steps"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw DataError(path.string() + ": unknown grid key \"" + key + "\"");
    if (!value.is_array()) throw DataError(path.string() + ": \"" + key + "\" must be an array");
  }

  SweepGrid grid;
  try {
    if (j.contains("method"))
      for (const auto& m : j["method"]) grid.methods.push_back(method_from_string(m.get<std::string>()));
    if (j.contains("lr")) grid.learning_rates = j["lr"].get<std::vector<double>>();
    if (j.contains("delta")) grid.deltas = j["delta"].get<std::vector<double>>();
    if (j.contains("lambda")) grid.lambdas = j["lambda"].get<std::vector<double>>();
    if (j.contains("beta")) grid.betas = j["beta"].get<std::vector<double>>();
    if (j.contains("steps")) grid.steps = j["steps"].get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return grid;
}

namespace {

template <class T>
std::vector<std::optional<T>> axis(const std::vector<T>& values) {
  if (values.empty()) return {std::nullopt};
  return {values.begin(), values.end()};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::vector<SweepRow> sweep(const ToyTask& task, const TrainConfig& base, const SweepGrid& grid,
                            std::size_t threads) {
  if (task.pairs.empty()) throw DataError("sweep task has no training pairs");

  std::vector<TrainConfig> configs;
  configs.reserve(grid.size());
  for (const auto& method : axis(grid.methods))
    for (const auto& lr : axis(grid.learning_rates))
      for (const auto& delta : axis(grid.deltas))
        for (const auto& lambda : axis(grid.lambdas))
          for (const auto& beta : axis(grid.betas))
            for (const auto& steps : axis(grid.steps)) {
              TrainConfig c = base;
              if (method) c.loss.method = *method;
              if (lr) c.learning_rate = *lr;
              if (delta) c.loss.delta = *delta;
              if (lambda) c.loss.lambda = *lambda;
              if (beta) c.loss.beta = *beta;
              if (steps) c.steps = *steps;
              configs.push_back(c);
            }

  ToyInit init = init_toy(task.num_prompts, task.vocab, base.seed);
  if (!task.lengths.empty()) {
    init.policy.set_lengths(task.lengths);
    init.reference.set_lengths(task.lengths);
  }

  std::vector<SweepRow> rows(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      const TrainConfig& c = configs[i];
      SweepRow& row = rows[i];
      row.method = c.loss.method;
      row.learning_rate = c.learning_rate;
      row.delta = c.loss.delta.value_or(0.0);
      row.lambda = c.loss.lambda.value_or(0.0);
      row.beta = c.loss.beta.value_or(0.0);
      row.steps = c.steps;
      try {
        const TrainLog log = train(init.policy, init.reference, task.pairs, c);
        row.budget = log.final().metrics.mean_lp_w;
        row.winrate_proxy = winrate_proxy(log.final_policy, init.reference, task);
        row.reward_accuracy = log.final().metrics.reward_accuracy;
        row.final_loss = log.final().loss;
        row.budget_shortfall =
            mean_budget_shortfall(batch_logprobs(log.final_policy, init.reference, task.pairs));
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
        spdlog::warn("sweep point {} failed: {}", i, e.what());
      }
    }
  };

  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, configs.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  return rows;
}

std::string to_csv(std::span<const SweepRow> rows) {
  std::string out =
      "method,lr,delta,lambda,beta,steps,budget,winrate_proxy,reward_accuracy,final_loss,"
      "budget_shortfall,status\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},", to_string(r.method), r.learning_rate, r.delta,
                       r.lambda, r.beta, r.steps);
    if (r.status == "ok") {
      out += fmt::format("{},{},{},{},{},", r.budget, r.winrate_proxy, r.reward_accuracy,
                         r.final_loss, r.budget_shortfall);
    } else {
      out += ",,,,,";
    }
    out += csv_field(r.status) + '\n';
  }
  return out;
}

}  // namespace prefopt
