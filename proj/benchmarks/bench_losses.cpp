// SPDX-License-Identifier: Apache-2.0
#include <random>

#include <benchmark/benchmark.h>

#include "prefopt/losses.hpp"

namespace {

prefopt::LogProbBatch make_batch(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ref(-60.0, -10.0), ratio(-5.0, 2.0);
  std::uniform_int_distribution<int> len(1, 64);
  prefopt::LogProbBatch b(n);
  for (auto& r : b) {
    r.lp_w_ref = ref(rng);
    r.lp_l_ref = ref(rng);
    r.lp_w_policy = r.lp_w_ref + ratio(rng);
    r.lp_l_policy = r.lp_l_ref + ratio(rng);
    r.len_w = len(rng);
    r.len_l = len(rng);
  }
  return b;
}

prefopt::LossConfig config_for(prefopt::Method m) {
  prefopt::LossConfig c;
  c.method = m;
  if (m == prefopt::Method::IPO || m == prefopt::Method::IPO_BCR) {
    c.tau = 0.1;
  } else {
    c.beta = prefopt::is_reference_free(m) ? 2.5 : 0.1;
  }
  if (prefopt::is_reference_free(m)) c.gamma = 0.5;
  c.lambda = 1.0;
  c.delta = 2.0;
  return c;
}

void BM_Loss(benchmark::State& state) {
  const auto method = static_cast<prefopt::Method>(state.range(0));
  const auto batch = make_batch(static_cast<std::size_t>(state.range(1)));
  const auto cfg = config_for(method);
  for (auto _ : state) benchmark::DoNotOptimize(prefopt::compute_loss(batch, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.SetLabel(std::string(prefopt::to_string(method)));
}

void methods(benchmark::internal::Benchmark* b) {
  for (int m = 0; m < 8; ++m)
    for (int n : {128, 4096}) b->Args({m, n});
}

}  // namespace

BENCHMARK(BM_Loss)->Apply(methods);

static void BM_FiniteDiffCheck(benchmark::State& state) {
  const auto batch = make_batch(32);
  const auto cfg = config_for(prefopt::Method::DPO_BCR);
  for (auto _ : state) benchmark::DoNotOptimize(prefopt::finite_diff_check(prefopt::compute_loss, batch, cfg, 1e-5));
}
BENCHMARK(BM_FiniteDiffCheck);
