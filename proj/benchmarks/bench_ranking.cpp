// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <memory>
#include <numeric>

#include <benchmark/benchmark.h>

#include "prefopt/ranking.hpp"

namespace {

struct Setup {
  prefopt::CandidateSet set;
  std::shared_ptr<prefopt::LatentRewardTable> table = std::make_shared<prefopt::LatentRewardTable>();

  explicit Setup(std::size_t m) {
    set.prompt_id = "p";
    std::vector<double> r(m);
    std::iota(r.begin(), r.end(), 0.0);
    std::shuffle(r.begin(), r.end(), prefopt::Rng(3));
    for (std::size_t i = 0; i < m; ++i) set.candidates.push_back("candidate " + std::to_string(i));
    table->set_all("p", r);
  }
};

}  // namespace

static void BM_IprSelect(benchmark::State& state) {
  Setup s(static_cast<std::size_t>(state.range(0)));
  prefopt::SimulatedJudge judge(s.table);
  for (auto _ : state) benchmark::DoNotOptimize(prefopt::ipr_select(s.set, "q", judge));
}
BENCHMARK(BM_IprSelect)->DenseRange(2, 8, 3)->Arg(32);

static void BM_CopelandSelect(benchmark::State& state) {
  Setup s(static_cast<std::size_t>(state.range(0)));
  prefopt::SimulatedJudge judge(s.table);
  for (auto _ : state) benchmark::DoNotOptimize(prefopt::copeland_select(s.set, "q", judge));
}
BENCHMARK(BM_CopelandSelect)->DenseRange(2, 8, 3)->Arg(32);

static void BM_BuildPairs(benchmark::State& state) {
  const std::size_t n = 1000, m = 5;
  auto table = std::make_shared<prefopt::LatentRewardTable>();
  std::vector<prefopt::PromptRecord> prompts;
  std::vector<prefopt::CandidateSet> sets;
  prefopt::Rng rng(1);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "p" + std::to_string(i);
    prompts.push_back({id, "question"});
    prefopt::CandidateSet s{id, {}};
    for (std::size_t k = 0; k < m; ++k) {
      s.candidates.push_back(id + "/" + std::to_string(k));
      table->set(id, k, normal(rng));
    }
    sets.push_back(std::move(s));
  }
  prefopt::SimulatedJudge judge(table);
  prefopt::BuildOptions o;
  o.max_in_flight = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(prefopt::build_pairs(prompts, sets, o, &judge, nullptr));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_BuildPairs)->Arg(1)->Arg(4)->UseRealTime();
