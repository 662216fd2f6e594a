// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "prefopt/trainer.hpp"

static void BM_LogitGradient(benchmark::State& state) {
  const auto task = prefopt::failure_mode_task(static_cast<std::size_t>(state.range(0)), 5);
  const auto init = prefopt::init_toy(task.num_prompts, task.vocab, 0);
  prefopt::LossConfig cfg;
  cfg.beta = 0.1;
  for (auto _ : state)
    benchmark::DoNotOptimize(prefopt::logit_gradient(init.policy, init.reference, task.pairs, cfg));
}
BENCHMARK(BM_LogitGradient)->Arg(8)->Arg(128);

static void BM_TrainFailureMode(benchmark::State& state) {
  const auto task = prefopt::failure_mode_task(8, 5);
  const auto init = prefopt::init_toy(8, 5, 0);
  prefopt::TrainConfig cfg;
  cfg.loss.beta = 0.1;
  cfg.steps = 2000;
  for (auto _ : state) benchmark::DoNotOptimize(prefopt::train(init.policy, init.reference, task.pairs, cfg));
}
BENCHMARK(BM_TrainFailureMode)->Unit(benchmark::kMillisecond);
