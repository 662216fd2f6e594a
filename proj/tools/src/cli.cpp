// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "prefopt/evaluate.hpp"
#include "prefopt/http_judge.hpp"
#include "prefopt/judge_cache.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/prefdata.hpp"
#include "prefopt/ranking.hpp"
#include "prefopt/trainer.hpp"

namespace prefopt::cli {

namespace {

using json = nlohmann::json;

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("prefopt");
    logger->set_pattern("[%Y-%m-%d %H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_default_logger(std::move(logger));
  });
}

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << content;
  if (!f) throw IoError("write failed: " + path);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

// Fills options the command line left unset from a flat JSON object whose
// keys are long option names.
void apply_json_config(CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");

  auto scalar = [&](const std::string& key, const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw ConfigError(path + ": unsupported value for \"" + key + "\"");
  };

  for (const auto& [key, value] : j.items()) {
    if (key == "config") throw ConfigError(path + ": config files cannot nest");
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr)
      throw ConfigError(path + ": unknown option \"" + key + "\" for " + sub.get_name());
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(scalar(key, v));
    } else {
      opt->add_result(scalar(key, value));
    }
    opt->run_callback();
  }
}

// ---------------------------------------------------------------------------
// Shared flag groups

struct JudgeFlags {
  std::string kind = "simulated";
  std::string rewards;
  double tie_band = 0.0;
  std::string endpoint;
  std::string model;
  double timeout_s = 60.0;
  int retries = 3;
  std::string api_key_env = "OPENAI_API_KEY";
  bool symmetrize = false;
  bool parse_error_as_tie = false;
  std::string cache;
};

void add_judge_flags(CLI::App* sub, JudgeFlags& f) {
  sub->add_option("--judge", f.kind, "Judge backend")
      ->check(CLI::IsMember({"simulated", "http"}))
      ->capture_default_str();
  sub->add_option("--rewards", f.rewards, "Latent reward table (JSONL) for the simulated judge and scorer");
  sub->add_option("--tie-band", f.tie_band, "Simulated judge tie band")->check(CLI::NonNegativeNumber);
  sub->add_option("--endpoint", f.endpoint, "Chat-completions URL for --judge http");
  sub->add_option("--model", f.model, "Model name for --judge http");
  sub->add_option("--timeout", f.timeout_s, "Per-request timeout in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--retries", f.retries, "Retries after the first attempt")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--api-key-env", f.api_key_env, "Environment variable holding the API key")
      ->capture_default_str();
  sub->add_flag("--symmetrize", f.symmetrize, "Judge both orderings; disagreement is a tie");
  sub->add_flag("--parse-error-as-tie", f.parse_error_as_tie,
                "Treat unparsable judge replies as ties");
  sub->add_option("--cache", f.cache, "Judge cache file (JSONL), created if missing");
}

std::shared_ptr<const LatentRewardTable> load_rewards(const JudgeFlags& f) {
  if (f.rewards.empty()) return nullptr;
  return std::make_shared<LatentRewardTable>(read_reward_table(f.rewards, f.tie_band));
}

std::shared_ptr<Judge> make_judge(const JudgeFlags& f, std::size_t max_in_flight,
                                  const std::shared_ptr<const LatentRewardTable>& table) {
  std::shared_ptr<Judge> judge;
  if (f.kind == "simulated") {
    if (!table) throw ConfigError("--rewards is required for the simulated judge");
    judge = std::make_shared<SimulatedJudge>(table);
    if (f.symmetrize) judge = std::make_shared<SymmetrizedJudge>(judge);
  } else {
    HttpJudgeOptions o;
    o.endpoint = f.endpoint;
    o.model = f.model;
    if (!f.api_key_env.empty()) {
      if (const char* key = std::getenv(f.api_key_env.c_str())) o.api_key = key;
    }
    o.timeout = std::chrono::milliseconds(static_cast<long long>(f.timeout_s * 1000.0));
    o.max_retries = f.retries;
    o.max_in_flight = max_in_flight;
    o.symmetrize = f.symmetrize;
    o.parse_error_as_tie = f.parse_error_as_tie;
    o.validate();
    judge = std::make_shared<HttpJudge>(std::move(o));
  }
  if (!f.cache.empty()) judge = std::make_shared<CachedJudge>(judge, f.cache);
  return judge;
}

struct LossFlags {
  std::string method = "dpo";
  std::optional<double> beta;
  std::optional<double> tau;
  std::optional<double> gamma;
  std::optional<double> lambda;
  std::optional<double> delta;
};

void add_loss_flags(CLI::App* sub, LossFlags& f) {
  sub->add_option("--method", f.method,
                  "dpo, ipo, simpo, cpo, dpop, dpo-bcr, ipo-bcr or simpo-bcr")
      ->capture_default_str();
  sub->add_option("--beta", f.beta, "Reward scale (default 0.1 where the method reads it)");
  sub->add_option("--tau", f.tau, "IPO margin parameter");
  sub->add_option("--gamma", f.gamma, "SimPO target margin");
  sub->add_option("--lambda", f.lambda, "Regularization weight");
  sub->add_option("--delta", f.delta, "Likelihood budget");
}

LossConfig make_loss_config(const LossFlags& f) {
  LossConfig c;
  c.method = method_from_string(f.method);
  c.beta = f.beta;
  c.tau = f.tau;
  c.gamma = f.gamma;
  c.lambda = f.lambda;
  c.delta = f.delta;
  if (!c.beta && c.method != Method::IPO && c.method != Method::IPO_BCR) c.beta = 0.1;
  c.validate();
  return c;
}

struct TrainFlags {
  double lr = 0.05;
  std::size_t steps = 2000;
  std::string optimizer = "adam";
  std::string schedule = "constant";
  double warmup = 0.1;
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  sub->add_option("--lr", f.lr, "Learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--steps", f.steps, "Optimizer steps")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--optimizer", f.optimizer)
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  sub->add_option("--schedule", f.schedule)
      ->check(CLI::IsMember({"constant", "cosine"}))
      ->capture_default_str();
  sub->add_option("--warmup", f.warmup, "Warmup fraction for the cosine schedule")->capture_default_str();
}

TrainConfig make_train_config(const TrainFlags& t, const LossFlags& l, std::uint64_t seed) {
  TrainConfig c;
  c.loss = make_loss_config(l);
  c.learning_rate = t.lr;
  c.steps = t.steps;
  c.seed = seed;
  c.optimizer = optimizer_from_string(t.optimizer);
  c.schedule = schedule_from_string(t.schedule);
  c.warmup_fraction = t.warmup;
  c.validate();
  return c;
}

struct TaskFlags {
  std::string kind = "failure-mode";
  std::size_t num_prompts = 8;
  std::size_t vocab = 5;
  std::string candidates;
  std::string pairs;
  std::string rewards;
  std::string strategy = "ipr";
  double tie_band = 0.0;
  double noise_sigma = 0.0;
  std::vector<int> lengths;
};

void add_task_flags(CLI::App* sub, TaskFlags& f) {
  sub->add_option("--task", f.kind, "failure-mode, synthetic, or pairs (from files)")
      ->check(CLI::IsMember({"failure-mode", "synthetic", "pairs"}))
      ->capture_default_str();
  sub->add_option("--num-prompts", f.num_prompts)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--vocab", f.vocab, "Completions per prompt")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  sub->add_option("--candidates", f.candidates, "Candidate sets for --task pairs");
  sub->add_option("--pairs", f.pairs, "Preference pairs for --task pairs");
  sub->add_option("--rewards", f.rewards, "Latent rewards for the winrate proxy (--task pairs)");
  sub->add_option("--strategy", f.strategy, "Pair strategy for --task synthetic")
      ->check(CLI::IsMember({"ipr", "scoring", "copeland"}))
      ->capture_default_str();
  sub->add_option("--tie-band", f.tie_band)->check(CLI::NonNegativeNumber);
  sub->add_option("--noise-sigma", f.noise_sigma)->check(CLI::NonNegativeNumber);
  sub->add_option("--lengths", f.lengths, "Token length of each completion")->delimiter(',');
}

ToyTask make_task(const TaskFlags& f, std::uint64_t seed) {
  ToyTask task;
  if (f.kind == "failure-mode") {
    task = failure_mode_task(f.num_prompts, f.vocab);
  } else if (f.kind == "synthetic") {
    SyntheticTaskOptions o;
    o.num_prompts = f.num_prompts;
    o.vocab = f.vocab;
    o.seed = seed;
    o.strategy = strategy_from_string(f.strategy);
    o.tie_band = f.tie_band;
    o.scorer_noise = f.noise_sigma;
    task = synthetic_task(o);
  } else {
    require(f.candidates, "--candidates");
    require(f.pairs, "--pairs");
    const auto sets = read_candidates(f.candidates);
    const auto pairs = read_pairs(f.pairs);
    std::optional<LatentRewardTable> table;
    if (!f.rewards.empty()) table = read_reward_table(f.rewards, 0.0);
    task = task_from_pairs(sets, pairs, table ? &*table : nullptr);
  }
  if (!f.lengths.empty()) {
    if (f.lengths.size() != task.vocab)
      throw ConfigError("--lengths needs " + std::to_string(task.vocab) + " values");
    task.lengths = f.lengths;
  }
  if (task.pairs.empty()) throw DataError("task has no training pairs");
  return task;
}

LogProbBatch read_logprob_batch(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  LogProbBatch batch;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      LogProbRow r;
      r.lp_w_policy = j.at("lp_w_policy").get<double>();
      r.lp_w_ref = j.value("lp_w_ref", 0.0);
      r.lp_l_policy = j.at("lp_l_policy").get<double>();
      r.lp_l_ref = j.value("lp_l_ref", 0.0);
      r.len_w = j.value("len_w", 1);
      r.len_l = j.value("len_l", 1);
      batch.push_back(r);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Subcommands

struct Globals {
  std::string log_level = "info";
  std::size_t max_in_flight = 4;
};

struct GeneratePairs {
  std::string config, prompts, candidates, out, traces;
  std::string strategy = "ipr", stop = "full", loser = "inverted-ipr";
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  bool fail_fast = false;
  JudgeFlags judge;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "JSON file of option defaults");
    sub->add_option("--prompts", prompts, "Prompts (JSONL)");
    sub->add_option("--candidates", candidates, "Candidate sets (JSONL)");
    sub->add_option("--out", out, "Output preference pairs (JSONL)");
    sub->add_option("--traces", traces, "Output winner tournament traces (JSONL)");
    sub->add_option("--strategy", strategy)
        ->check(CLI::IsMember({"ipr", "scoring", "copeland"}))
        ->capture_default_str();
    sub->add_option("--stop", stop)->check(CLI::IsMember({"full", "first-non-tie"}))->capture_default_str();
    sub->add_option("--loser", loser)
        ->check(CLI::IsMember({"inverted-ipr", "scoring-argmin"}))
        ->capture_default_str();
    sub->add_option("--noise-sigma", noise_sigma, "Scorer noise")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", seed)->capture_default_str();
    sub->add_flag("--fail-fast", fail_fast, "Stop at the first failing candidate set");
    add_judge_flags(sub, judge);
  }

  int run(const Globals& g, std::ostream&) {
    require(prompts, "--prompts");
    require(candidates, "--candidates");
    require(out, "--out");
    const auto prompt_records = read_prompts(prompts);
    const auto sets = read_candidates(candidates);
    const auto table = load_rewards(judge);

    BuildOptions o;
    o.strategy = strategy_from_string(strategy);
    o.stop = stop_rule_from_string(stop);
    o.loser = loser_rule_from_string(loser);
    o.fail_fast = fail_fast;
    o.max_in_flight = g.max_in_flight;
    o.seed = seed;

    std::shared_ptr<Judge> j;
    std::unique_ptr<TableScorer> scorer;
    if (o.strategy != Strategy::Scoring) j = make_judge(judge, g.max_in_flight, table);
    if (o.strategy == Strategy::Scoring ||
        (o.strategy == Strategy::IPR && o.loser == LoserRule::ScoringArgmin)) {
      if (!table) throw ConfigError("--rewards is required for the scorer");
      scorer = std::make_unique<TableScorer>(ScorerConfig{table, noise_sigma});
    }

    const BuildReport report = build_pairs(prompt_records, sets, o, j.get(), scorer.get());
    write_pairs(report.pairs(), out);
    if (!traces.empty()) write_traces(report.traces(), traces);
    spdlog::info("generate-pairs: {} sets, {} pairs, {} skipped, {} failed", report.entries.size(),
                 report.entries.size() - report.skipped() - report.failed(), report.skipped(),
                 report.failed());
    return report.failed() > 0 ? kExitRuntime : kExitOk;
  }
};

struct RankStats {
  std::string config, traces, out;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "JSON file of option defaults");
    sub->add_option("--traces", traces, "Full-mode IPR traces (JSONL)");
    sub->add_option("--out", out, "Output CSV (default stdout)");
  }

  int run(const Globals&, std::ostream& os) {
    require(traces, "--traces");
    const auto t = read_traces(traces);
    emit(out, to_csv(tournament_stats(t)), os);
    return kExitOk;
  }
};

struct LossEval {
  std::string config, batch, out;
  bool gradients = false;
  LossFlags loss;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "JSON file of option defaults (e.g. the loss config)");
    sub->add_option("--batch", batch, "Log-prob rows (JSONL)");
    sub->add_option("--out", out, "Output JSON (default stdout)");
    sub->add_flag("--gradients", gradients, "Include per-example gradients");
    add_loss_flags(sub, loss);
  }

  int run(const Globals&, std::ostream& os) {
    require(batch, "--batch");
    const LossConfig cfg = make_loss_config(loss);
    const LogProbBatch rows = read_logprob_batch(batch);
    const LossOutput r = compute_loss(rows, cfg);
    json j;
    j["method"] = std::string(to_string(cfg.method));
    j["n"] = rows.size();
    j["loss"] = r.loss;
    j["metrics"] = {{"reward_margin", r.metrics.reward_margin},
                    {"reward_accuracy", r.metrics.reward_accuracy},
                    {"mean_lp_w", r.metrics.mean_lp_w},
                    {"mean_hinge", r.metrics.mean_hinge}};
    if (gradients) {
      j["grad_lp_w"] = r.grad_lp_w;
      j["grad_lp_l"] = r.grad_lp_l;
    }
    emit(out, j.dump() + "\n", os);
    return kExitOk;
  }
};

struct TrainToy {
  std::string config, out;
  std::uint64_t seed = 0;
  TaskFlags task;
  LossFlags loss;
  TrainFlags train_flags;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "JSON file of option defaults");
    sub->add_option("--out", out, "Output training log CSV (default stdout)");
    sub->add_option("--seed", seed, "Initialization seed")->capture_default_str();
    add_task_flags(sub, task);
    add_loss_flags(sub, loss);
    add_train_flags(sub, train_flags);
  }

  int run(const Globals&, std::ostream& os) {
    const TrainConfig cfg = make_train_config(train_flags, loss, seed);
    const ToyTask t = make_task(task, seed);
    ToyInit init = init_toy(t.num_prompts, t.vocab, seed);
    init.policy.set_lengths(t.lengths);
    init.reference.set_lengths(t.lengths);
    const TrainLog log = train(init.policy, init.reference, t.pairs, cfg);
    emit(out, log.to_csv(), os);
    spdlog::info("train-toy: mean_lp_w {:.6f} -> {:.6f}, reward_accuracy {:.4f} -> {:.4f}, winrate proxy {:.4f}",
                 log.initial().metrics.mean_lp_w, log.final().metrics.mean_lp_w,
                 log.initial().metrics.reward_accuracy, log.final().metrics.reward_accuracy,
                 winrate_proxy(log.final_policy, init.reference, t));
    return kExitOk;
  }
};

struct Sweep {
  std::string config, grid, out;
  std::uint64_t seed = 0;
  TaskFlags task;
  LossFlags loss;
  TrainFlags train_flags;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "JSON file of option defaults");
    sub->add_option("--grid", grid, "Grid spec (JSON object of arrays)");
    sub->add_option("--out", out, "Output CSV (default stdout)");
    sub->add_option("--seed", seed, "Initialization seed shared by every point")->capture_default_str();
    add_task_flags(sub, task);
    add_loss_flags(sub, loss);
    add_train_flags(sub, train_flags);
  }

  int run(const Globals& g, std::ostream& os) {
    require(grid, "--grid");
    const SweepGrid sg = read_sweep_grid(grid);
    const ToyTask t = make_task(task, seed);
    // Per-point loss fields come from the grid; validate only the shared parts here.
    TrainConfig base;
    base.loss.method = method_from_string(loss.method);
    base.loss.beta = loss.beta ? loss.beta : std::optional<double>(0.1);
    base.loss.tau = loss.tau;
    base.loss.gamma = loss.gamma;
    base.loss.lambda = loss.lambda;
    base.loss.delta = loss.delta;
    base.learning_rate = train_flags.lr;
    base.steps = train_flags.steps;
    base.seed = seed;
    base.optimizer = optimizer_from_string(train_flags.optimizer);
    base.schedule = schedule_from_string(train_flags.schedule);
    base.warmup_fraction = train_flags.warmup;
    const auto rows = sweep(t, base, sg, g.max_in_flight);
    emit(out, to_csv(rows), os);
    const auto failed = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.status != "ok"; });
    spdlog::info("sweep: {} points, {} failed", rows.size(), failed);
    return kExitOk;
  }
};

struct EvaluateAgreement {
  std::string config, prompts, candidates, pairs, label = "pairs", out;
  std::vector<std::string> strategies{"ipr", "scoring"};
  std::string stop = "full", loser = "inverted-ipr";
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  JudgeFlags judge;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "JSON file of option defaults");
    sub->add_option("--prompts", prompts, "Prompts (JSONL)");
    sub->add_option("--candidates", candidates, "Candidate sets (JSONL)");
    sub->add_option("--pairs", pairs, "Evaluate an existing pair file instead of building pairs");
    sub->add_option("--label", label, "Row label for --pairs")->capture_default_str();
    sub->add_option("--strategies", strategies, "Strategies to build and compare")
        ->delimiter(',')
        ->check(CLI::IsMember({"ipr", "scoring", "copeland"}))
        ->capture_default_str();
    sub->add_option("--stop", stop)->check(CLI::IsMember({"full", "first-non-tie"}))->capture_default_str();
    sub->add_option("--loser", loser)
        ->check(CLI::IsMember({"inverted-ipr", "scoring-argmin"}))
        ->capture_default_str();
    sub->add_option("--noise-sigma", noise_sigma, "Noise of the scorer used by the scoring strategy")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", seed)->capture_default_str();
    sub->add_option("--out", out, "Output CSV (default stdout)");
    add_judge_flags(sub, judge);
  }

  int run(const Globals& g, std::ostream& os) {
    require(candidates, "--candidates");
    const auto sets = read_candidates(candidates);
    const auto table = load_rewards(judge);
    const auto eval_judge = make_judge(judge, g.max_in_flight, table);
    AgreementOptions ao;
    ao.max_in_flight = g.max_in_flight;

    std::vector<StrategyRow> rows;
    if (!pairs.empty()) {
      StrategyRow row;
      row.label = label;
      const auto p = read_pairs(pairs);
      row.pairs_built = p.size();
      row.result = agreement(p, sets, *eval_judge, ao);
      rows.push_back(std::move(row));
    } else {
      require(prompts, "--prompts");
      if (!table) throw ConfigError("--rewards is required to build pairs");
      const auto prompt_records = read_prompts(prompts);
      // Pairs are built against the latent rewards; the eval judge may differ.
      auto build_judge = std::make_shared<SimulatedJudge>(table);
      TableScorer scorer(ScorerConfig{table, noise_sigma});
      std::vector<StrategyConfig> configs;
      for (const auto& s : strategies) {
        StrategyConfig c;
        c.label = s;
        c.options.strategy = strategy_from_string(s);
        c.options.stop = stop_rule_from_string(stop);
        c.options.loser = loser_rule_from_string(loser);
        c.options.max_in_flight = g.max_in_flight;
        c.options.seed = seed;
        c.judge = build_judge.get();
        c.scorer = &scorer;
        configs.push_back(std::move(c));
      }
      rows = compare_strategies(prompt_records, sets, *eval_judge, configs, ao);
    }
    emit(out, to_csv(rows), os);
    const bool any_error = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.error.has_value(); });
    return any_error ? kExitRuntime : kExitOk;
  }
};

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  init_logging();

  CLI::App app{"Preference-pair construction and preference-optimization toolkit", "prefopt"};
  app.set_version_flag("--version", "prefopt 0.1.0");
  app.require_subcommand(0, 1);
  app.fallthrough();

  Globals globals;
  app.add_option("--log-level", globals.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}))
      ->capture_default_str();
  app.add_option("--max-in-flight", globals.max_in_flight,
                 "Concurrent judge calls / training runs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  GeneratePairs generate_pairs;
  RankStats rank_stats;
  LossEval loss_eval;
  TrainToy train_toy;
  Sweep sweep_cmd;
  EvaluateAgreement evaluate_agreement;

  auto* gp = app.add_subcommand("generate-pairs", "Build preference pairs from candidate sets");
  auto* rs = app.add_subcommand("rank-stats", "Per-iteration verdict counts of IPR traces (CSV)");
  auto* le = app.add_subcommand("loss-eval", "Evaluate a preference loss on a log-prob batch");
  auto* tt = app.add_subcommand("train-toy", "Train a toy softmax policy and log metrics (CSV)");
  auto* sw = app.add_subcommand("sweep", "Train over a hyperparameter grid (CSV)");
  auto* ea = app.add_subcommand("evaluate-agreement", "Agreement of preference pairs with a judge (CSV)");
  generate_pairs.attach(gp);
  rank_stats.attach(rs);
  loss_eval.attach(le);
  train_toy.attach(tt);
  sweep_cmd.attach(sw);
  evaluate_agreement.attach(ea);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  if (app.get_subcommands().empty()) {
    err << "error: a subcommand is required\n\n" << app.help();
    return kExitUsage;
  }
  spdlog::set_level(spdlog::level::from_str(globals.log_level));

  auto dispatch = [&](CLI::App* sub, const std::string& config, auto& cmd) -> std::optional<int> {
    if (!sub->parsed()) return std::nullopt;
    if (!config.empty()) apply_json_config(*sub, config);
    return cmd.run(globals, out);
  };

  try {
    if (auto r = dispatch(gp, generate_pairs.config, generate_pairs)) return *r;
    if (auto r = dispatch(rs, rank_stats.config, rank_stats)) return *r;
    if (auto r = dispatch(le, loss_eval.config, loss_eval)) return *r;
    if (auto r = dispatch(tt, train_toy.config, train_toy)) return *r;
    if (auto r = dispatch(sw, sweep_cmd.config, sweep_cmd)) return *r;
    if (auto r = dispatch(ea, evaluate_agreement.config, evaluate_agreement)) return *r;
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace prefopt::cli
