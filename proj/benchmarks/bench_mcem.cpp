#include <benchmark/benchmark.h>

#include "mrpath/inference.hpp"
#include "mrpath/mcem.hpp"
#include "mrpath/posterior.hpp"
#include "mrpath/simulate.hpp"

using namespace mrpath;

namespace {

SimOutput sim(std::size_t p) {
  PresetOptions o;
  o.p = p;
  return simulate_dataset(preset("sim1-k2", o));
}

void BM_EStep(benchmark::State& state) {
  const auto s = sim(static_cast<std::size_t>(state.range(0)));
  const auto m = static_cast<std::size_t>(state.range(1));
  std::uint64_t step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(e_step(s.dataset, s.params_true, m, {1, 0, step++}));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * s.dataset.size() * m));
}
BENCHMARK(BM_EStep)->Args({100, 500})->Args({500, 500})->Args({500, 2000})->Unit(benchmark::kMillisecond);

void BM_MStep(benchmark::State& state) {
  const auto s = sim(static_cast<std::size_t>(state.range(0)));
  const auto sample = e_step(s.dataset, s.params_true, 1000, {1, 0, 0});
  for (auto _ : state) benchmark::DoNotOptimize(m_step(sample, s.dataset));
}
BENCHMARK(BM_MStep)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_DeltaQ(benchmark::State& state) {
  const auto s = sim(500);
  const auto sample = e_step(s.dataset, s.params_true, 1000, {1, 0, 0});
  const auto next = m_step_aligned(sample, s.dataset).params;
  for (auto _ : state) benchmark::DoNotOptimize(delta_q_test(sample, next, s.params_true, s.dataset, 0.1));
}
BENCHMARK(BM_DeltaQ)->Unit(benchmark::kMillisecond);

void BM_Information(benchmark::State& state) {
  const auto s = sim(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_information(s.params_true, s.dataset, 1000, 1));
}
BENCHMARK(BM_Information)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Fit(benchmark::State& state) {
  const auto s = sim(static_cast<std::size_t>(state.range(0)));
  McemConfig cfg;
  cfg.n_restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fit(s.dataset, 2, cfg));
}
BENCHMARK(BM_Fit)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Posterior(benchmark::State& state) {
  const auto s = sim(31);
  for (auto _ : state) benchmark::DoNotOptimize(summarize_posteriors(s.dataset, s.params_true, {0.95, 20000, 2000, 1}));
}
BENCHMARK(BM_Posterior)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
