// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "oracles.hpp"
#include "prefopt/error.hpp"
#include "prefopt/evaluate.hpp"
#include "prefopt/http_judge.hpp"
#include "prefopt/judge_cache.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/ranking.hpp"
#include "prefopt/trainer.hpp"
#include "stub_server.hpp"
#include "temp_dir.hpp"

using namespace prefopt;
using namespace prefopt::testing;

namespace {

// Collects sub-check failures for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string fmt_double(double x) {
  std::ostringstream s;
  s.precision(12);
  s << x;
  return s.str();
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<void(Check&)> body;
};

// ---------------------------------------------------------------------------

void golden_values(Check& c) {
  auto row = [](double w_gap, double l_gap) { return LogProbRow{-20 + w_gap, -20, -25 + l_gap, -25, 1, 1}; };
  auto eval = [](const LogProbRow& r, const LossConfig& cfg) { return compute_loss(LogProbBatch{r}, cfg).loss; };

  LossConfig dpo;
  dpo.method = Method::DPO;
  dpo.beta = 0.1;
  const double v1 = eval(row(0, 0), dpo);
  c.expect(std::abs(v1 - std::log(2.0)) <= 1e-12, "DPO zero ratios = " + fmt_double(v1) + ", want ln 2");

  LossConfig dpop = dpo;
  dpop.method = Method::DPOP;
  dpop.lambda = 5.0;
  const double v2 = eval(row(-1, -2), dpop);
  c.expect(std::abs(v2 - 4.907398) <= 1e-6,
           "DPOP example = " + fmt_double(v2) + ", criterion literal 4.907398 (|diff| " +
               fmt_double(std::abs(v2 - 4.907398)) + "; -ln sigma(-4.9) = 4.907418994)");

  LossConfig bcr = dpo;
  bcr.method = Method::DPO_BCR;
  bcr.lambda = 1.0;
  bcr.delta = 1.0;
  const double v3 = eval(row(-3, -3), bcr);
  c.expect(std::abs(v3 - 2.693147) <= 1e-6, "DPO-BCR example = " + fmt_double(v3));

  LossConfig simpo;
  simpo.method = Method::SimPO;
  simpo.beta = 2.5;
  simpo.gamma = 0.5;
  const double v4 = eval(LogProbRow{-3, -1, -8, -1, 3, 4}, simpo);
  c.expect(std::abs(v4 - 0.126928) <= 1e-6, "SimPO example = " + fmt_double(v4));
}

void gradient_suite(Check& c) {
  Rng rng(20240601);
  for (Method m : all_methods()) {
    double worst = 0;
    for (int draw = 0; draw < 250; ++draw) {
      const auto cfg = random_config(m, rng);
      const auto batch = random_batch(1 + draw % 32, is_reference_free(m), rng);
      worst = std::max(worst, finite_diff_check(compute_loss, batch, cfg, 1e-5));
    }
    c.expect(worst < 1e-6, std::string(to_string(m)) + " max rel err " + fmt_double(worst));
  }
}

void reduction_identities(Check& c) {
  Rng rng(7);
  const std::vector<std::pair<Method, Method>> pairs{{Method::DPOP, Method::DPO},
                                                     {Method::DPO_BCR, Method::DPO},
                                                     {Method::CPO, Method::SimPO},
                                                     {Method::IPO_BCR, Method::IPO},
                                                     {Method::SimPO_BCR, Method::SimPO}};
  for (const auto& [ext, base] : pairs) {
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto batch = random_batch(1 + trial % 64, is_reference_free(base), rng);
      LossConfig ce = random_config(ext, rng);
      ce.lambda = 0.0;
      LossConfig cb = ce;
      cb.method = base;
      const double a = compute_loss(batch, ce).loss, b = compute_loss(batch, cb).loss;
      if (std::memcmp(&a, &b, sizeof a) != 0) ++mismatches;
    }
    c.expect(mismatches == 0, std::string(to_string(ext)) + "(lambda=0) != " + std::string(to_string(base)) + " on " +
                                  std::to_string(mismatches) + "/100 batches");
  }
}

void tournament_oracle(Check& c) {
  Rng rng(4242);
  for (std::size_t m = 2; m <= 8; ++m) {
    int wrong = 0, bad_calls = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const auto r = distinct_rewards(m, rng);
      const auto set = make_set("p", m);
      CountingJudge judge(std::make_shared<SimulatedJudge>(make_table("p", r)));
      const auto ipr = ipr_select(set, "q", judge);
      const std::size_t ipr_calls = judge.calls.exchange(0);
      const auto cop = copeland_select(set, "q", judge);
      const std::size_t cop_calls = judge.calls.load();
      const std::size_t truth = latent_argmax(r);
      if (ipr.winner_index != truth || cop.winner_index != truth) ++wrong;
      if (ipr_calls != m - 1 || cop_calls != m * (m - 1) / 2) ++bad_calls;
    }
    c.expect(wrong == 0, "M=" + std::to_string(m) + ": " + std::to_string(wrong) + " winner mismatches");
    c.expect(bad_calls == 0, "M=" + std::to_string(m) + ": " + std::to_string(bad_calls) + " call-count mismatches");
  }
}

void tie_rules(Check& c) {
  for (std::size_t m = 2; m <= 8; ++m) {
    SimulatedJudge judge(make_table("p", std::vector<double>(m, 1.0), 0.5));
    const auto set = make_set("p", m);
    for (auto stop : {StopRule::Full, StopRule::FirstNonTie}) {
      const auto t = ipr_select(set, "q", judge, stop);
      c.expect(t.winner_index == 0, "all-tie M=" + std::to_string(m) + " " + std::string(to_string(stop)) +
                                        " winner " + std::to_string(t.winner_index));
    }
  }
  // tie, then the baseline wins: baseline survives both duels
  {
    SimulatedJudge judge(make_table("p", {2.0, 2.1, 1.0}, 0.5));
    const auto t = ipr_select(make_set("p", 3), "q", judge);
    c.expect(t.outcomes[0].verdict == Verdict::Tie && t.winner_index == 0, "tie-then-baseline-win chain");
  }
  // tie, then a later candidate wins against the kept baseline
  {
    SimulatedJudge judge(make_table("p", {0.0, 0.1, 5.0}, 0.5));
    const auto t = ipr_select(make_set("p", 3), "q", judge);
    c.expect(t.outcomes[0].verdict == Verdict::Tie && t.outcomes[1].baseline_index == 0 && t.winner_index == 2,
             "tie-then-win chain keeps baseline 0 through the tie");
    const auto f = ipr_select(make_set("p", 3), "q", judge, StopRule::FirstNonTie);
    c.expect(f.winner_index == 2 && f.judge_calls == 2, "first-non-tie skips the tie");
  }
}

void failure_mode(Check& c) {
  const ToyTask task = failure_mode_task(8, 5);
  const ToyInit init = init_toy(task.num_prompts, task.vocab, 0);
  auto run = [&](Method m, std::optional<double> lambda, std::optional<double> delta) {
    TrainConfig cfg;
    cfg.loss.method = m;
    cfg.loss.beta = 0.1;
    cfg.loss.lambda = lambda;
    cfg.loss.delta = delta;
    cfg.learning_rate = 0.05;
    cfg.steps = 2000;
    cfg.seed = 0;
    return train(init.policy, init.reference, task.pairs, cfg);
  };
  const auto dpo = run(Method::DPO, {}, {});
  c.expect(dpo.final().metrics.mean_lp_w < dpo.initial().metrics.mean_lp_w,
           "DPO mean_lp_w " + fmt_double(dpo.initial().metrics.mean_lp_w) + " -> " +
               fmt_double(dpo.final().metrics.mean_lp_w));
  c.expect(dpo.final().metrics.reward_accuracy >= 0.9,
           "DPO reward_accuracy " + fmt_double(dpo.final().metrics.reward_accuracy));
  const auto dpop = run(Method::DPOP, 5.0, {});
  c.expect(dpop.final().metrics.mean_lp_w >= dpop.initial().metrics.mean_lp_w - 1e-3,
           "DPOP mean_lp_w " + fmt_double(dpop.initial().metrics.mean_lp_w) + " -> " +
               fmt_double(dpop.final().metrics.mean_lp_w));
  for (double delta : {1.0, 2.0, 4.0}) {
    const auto bcr = run(Method::DPO_BCR, 1.0, delta);
    const double hinge = mean_budget_shortfall(batch_logprobs(bcr.final_policy, init.reference, task.pairs), delta);
    c.expect(hinge <= 1e-2, "DPO-BCR delta=" + fmt_double(delta) + " mean hinge " + fmt_double(hinge));
  }
}

void sweep_artifact(Check& c) {
  TempDir dir;
  write_file(dir / "grid.json",
             R"({"method": ["dpo", "dpo_bcr"], "lr": [0.01, 0.05], "lambda": [1], "delta": [0, 2, 4], "steps": [500]})");
  auto once = [&](const std::string& out) {
    const std::vector<std::string> args{"--log-level", "warn", "sweep", "--grid", (dir / "grid.json").string(),
                                        "--seed", "0", "--out", out};
    std::ostringstream o, e;
    return cli::run(args, o, e);
  };
  const auto a = dir / "a.csv", b = dir / "b.csv";
  c.expect(once(a.string()) == 0 && once(b.string()) == 0, "sweep exited non-zero");
  const std::string csv = read_file(a);
  c.expect(csv == read_file(b), "rerun differs");
  std::istringstream lines(csv);
  std::string header, line;
  std::getline(lines, header);
  c.expect(header.rfind("method,lr,delta,lambda,beta,steps,budget,winrate_proxy,", 0) == 0, "unexpected header");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    c.expect(fields.size() >= 8 && !fields[6].empty() && !fields[7].empty(), "unpopulated row: " + line);
  }
  c.expect(rows >= 12, std::to_string(rows) + " grid points");
}

void judge_protocol(Check& c) {
  // render / parse
  const std::vector<std::pair<std::string, JudgeVerdict>> fixtures{
      {"Reasoning... <verdict>B</verdict>", JudgeVerdict::B},
      {"<verdict>A</verdict>", JudgeVerdict::A},
      {"first <verdict>A</verdict> then <verdict>tie</verdict>", JudgeVerdict::Tie},
      {"format is <verdict>xxx</verdict>; final: <verdict>B</verdict>", JudgeVerdict::B},
      {"<VERDICT> a </VERDICT>", JudgeVerdict::A},
      {"<verdict>\n  TIE\n</verdict>\n", JudgeVerdict::Tie}};
  for (const auto& [raw, want] : fixtures) {
    try {
      c.expect(parse_verdict(raw) == want, "parse fixture: " + raw);
    } catch (const std::exception& e) {
      c.expect(false, "parse fixture threw: " + raw);
    }
  }
  for (const char* bad : {"no tags", "<verdict>C</verdict>", "<verdict>A"}) {
    bool threw = false;
    try {
      parse_verdict(bad);
    } catch (const ParseError& e) {
      threw = e.raw() == bad;
    }
    c.expect(threw, std::string("ParseError expected for: ") + bad);
  }
  const std::string rendered = render_judge_prompt("Q", "alpha", "beta");
  c.expect(rendered.find("<assistant_a>\nalpha\n</assistant_a>") != std::string::npos &&
               rendered.find("<assistant_b>\nbeta\n</assistant_b>") != std::string::npos &&
               rendered.find("<question>\nQ\n</question>") != std::string::npos,
           "render slots");

  const CompareRequest req{"p", "Q", 0, "alpha", 1, "beta"};
  auto opts = [](const StubServer& s) {
    HttpJudgeOptions o;
    o.endpoint = s.endpoint();
    o.model = "stub";
    o.retry_backoff = std::chrono::milliseconds(1);
    o.timeout = std::chrono::milliseconds(2000);
    return o;
  };
  // retry
  {
    StubServer s([](int n, const httplib::Request&, httplib::Response& res) {
      if (n < 2) {
        res.status = 503;
        return;
      }
      reply(res, "<verdict>B</verdict>");
    });
    HttpJudge j(opts(s));
    const auto r = j.query(render_judge_prompt("Q", "alpha", "beta"));
    c.expect(r.verdict == JudgeVerdict::B && r.retry_count == 2 && s.requests() == 3, "retry path");
  }
  // timeout
  {
    StubServer s([](int, const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(500));
      reply(res, "<verdict>A</verdict>");
    });
    auto o = opts(s);
    o.timeout = std::chrono::milliseconds(100);
    o.max_retries = 1;
    HttpJudge j(o);
    bool judge_error = false;
    try {
      j.compare(req);
    } catch (const JudgeError&) {
      judge_error = true;
    }
    c.expect(judge_error && s.requests() == 2, "timeout path");
  }
  // symmetrize disagreement
  {
    StubServer s([](int, const httplib::Request&, httplib::Response& res) { reply(res, "<verdict>A</verdict>"); });
    auto o = opts(s);
    o.symmetrize = true;
    HttpJudge j(o);
    c.expect(j.compare(req).verdict == Verdict::Tie && s.requests() == 2, "symmetrize disagreement -> Tie");
  }
  // cache
  {
    Rng rng(3);
    auto table = make_table("p", distinct_rewards(6, rng), 0.2);
    auto inner = std::make_shared<CountingJudge>(std::make_shared<SimulatedJudge>(table));
    SimulatedJudge plain(table);
    CachedJudge cache(inner);
    const auto set = make_set("p", 6);
    std::size_t unique = 0;
    bool transparent = true;
    for (int rep = 0; rep < 5; ++rep)
      for (std::size_t b = 0; b < 6; ++b)
        for (std::size_t k = 0; k < 6; ++k) {
          if (b == k) continue;
          if (rep == 0) ++unique;
          const CompareRequest r{"p", "q", b, set.candidates[b], k, set.candidates[k]};
          transparent = transparent && cache.compare(r) == plain.compare(r);
        }
    c.expect(transparent, "cache changed an outcome");
    c.expect(inner->calls.load() == unique, "cache inner calls " + std::to_string(inner->calls.load()) + " for " +
                                                std::to_string(unique) + " keys");
  }
}

void agreement_protocol(Check& c) {
  auto world = [](std::size_t n, std::size_t m, std::uint64_t seed) {
    Rng rng(seed);
    auto table = std::make_shared<LatentRewardTable>();
    std::vector<PromptRecord> prompts;
    std::vector<CandidateSet> sets;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "p" + std::to_string(i);
      prompts.push_back({id, "question " + id});
      sets.push_back(make_set(id, m));
      table->set_all(id, distinct_rewards(m, rng));
    }
    return std::tuple{prompts, sets, table};
  };

  {
    auto [prompts, sets, table] = world(500, 5, 1);
    SimulatedJudge judge(table);
    const auto pairs = build_pairs(prompts, sets, BuildOptions{}, &judge, nullptr).pairs();
    const auto r = agreement(pairs, sets, judge);
    c.expect(r.agreement_pct() == 100.0, "self-consistency " + fmt_double(r.agreement_pct()) + "%");
  }
  {
    auto [prompts, sets, table] = world(5000, 5, 2);
    SimulatedJudge judge(table);
    TableScorer noisy(ScorerConfig{table, 1000.0});
    BuildOptions o;
    o.strategy = Strategy::Scoring;
    o.seed = 11;
    const auto pairs = build_pairs(prompts, sets, o, nullptr, &noisy).pairs();
    const auto r = agreement(pairs, sets, judge, AgreementOptions{false, 4});
    c.expect(std::abs(r.agreement_pct() - 50.0) <= 3.0,
             "high-noise scoring agreement " + fmt_double(r.agreement_pct()) + "% over n=" + std::to_string(r.n));
  }
  {
    // IPR with a noiseless judge vs scoring with a noisy reward model,
    // both judged by the latent-reward judge.
    auto [prompts, sets, table] = world(2000, 5, 3);
    SimulatedJudge eval(table), build(table);
    TableScorer noisy(ScorerConfig{table, 1.0});
    BuildOptions so;
    so.strategy = Strategy::Scoring;
    so.seed = 5;
    const std::vector<StrategyConfig> configs{{"ipr", BuildOptions{}, &build, nullptr}, {"scoring", so, nullptr, &noisy}};
    const auto rows = compare_strategies(prompts, sets, eval, configs);
    c.expect(rows.size() == 2 && !rows[0].error && !rows[1].error, "compare_strategies rows");
    if (rows.size() == 2)
      c.expect(rows[0].result.agreement_pct() >= rows[1].result.agreement_pct(),
               "IPR " + fmt_double(rows[0].result.agreement_pct()) + "% vs scoring " +
                   fmt_double(rows[1].result.agreement_pct()) + "%");
  }
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria{
      {1, "loss golden values", 1, golden_values},
      {2, "gradient suite", 30, gradient_suite},
      {3, "reduction identities", 10, reduction_identities},
      {4, "tournament oracle equivalence", 10, tournament_oracle},
      {5, "tie rules", 10, tie_rules},
      {6, "failure-mode dynamics", 120, failure_mode},
      {7, "sweep artifact", 120, sweep_artifact},
      {8, "judge protocol", 60, judge_protocol},
      {9, "agreement protocol", 60, agreement_protocol},
  };
  int failed = 0;
  for (const auto& crit : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      crit.body(check);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > crit.budget_s) check.failures.push_back("took " + fmt_double(secs) + " s");
    const bool ok = check.failures.empty();
    failed += ok ? 0 : 1;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << crit.id << ": " << crit.name << " ("
              << fmt_double(std::round(secs * 1000) / 1000) << " s)";
    for (const auto& f : check.failures) std::cout << "\n    - " << f;
    std::cout << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
