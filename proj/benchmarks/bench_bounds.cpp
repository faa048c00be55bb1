#include <random>

#include <benchmark/benchmark.h>

#include "ssrcps/bounds.hpp"
#include "ssrcps/ppi.hpp"
#include "ssrcps/sim.hpp"

using namespace ssrcps;

namespace {

bounds::BoundedSample bernoulli_sample(std::size_t n, double p) {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(p);
  std::vector<double> v(n);
  for (auto& x : v) x = coin(rng) ? 1.0 : 0.0;
  return bounds::BoundedSample(std::move(v), bounds::Support{0.0, 1.0});
}

void BM_ClopperPearson(benchmark::State& state) {
  const auto n = state.range(0);
  const bounds::BinomialCount c(n, n / 7);
  for (auto _ : state) benchmark::DoNotOptimize(bounds::clopper_pearson_ucb(c, bounds::ErrorLevel(0.1)));
}
BENCHMARK(BM_ClopperPearson)->Arg(130)->Arg(5000)->Arg(100000);

void BM_Wsr(benchmark::State& state) {
  const auto s = bernoulli_sample(static_cast<std::size_t>(state.range(0)), 0.15);
  for (auto _ : state) benchmark::DoNotOptimize(bounds::wsr_ucb(s, bounds::ErrorLevel(0.1)));
}
BENCHMARK(BM_Wsr)->Arg(130)->Arg(1000)->Arg(4000);

void BM_Clt(benchmark::State& state) {
  const auto s = bernoulli_sample(static_cast<std::size_t>(state.range(0)), 0.15);
  for (auto _ : state) benchmark::DoNotOptimize(bounds::clt_ucb(s, bounds::ErrorLevel(0.1)));
}
BENCHMARK(BM_Clt)->Arg(130)->Arg(4000);

void BM_SsBinaryCalibrate(benchmark::State& state) {
  sim::ScenarioConfig c;
  const auto scenario = sim::generate_scenario(c, 0);
  const auto split = ppi::BudgetSplit::for_total(0.1, 0.01, 0.09);
  for (auto _ : state) benchmark::DoNotOptimize(ppi::ss_binary_calibrate(scenario.data, c.alpha, split));
}
BENCHMARK(BM_SsBinaryCalibrate);

void BM_SsGeneralWsrCalibrate(benchmark::State& state) {
  sim::ScenarioConfig c;
  const auto scenario = sim::generate_scenario(c, 0);
  const rcps::RiskSpec spec(c.alpha, bounds::ErrorLevel(c.delta));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ppi::ss_general_calibrate(scenario.data, spec, bounds::UcbMethod::wsr, ppi::PowerTuning::fixed_one()));
  }
}
BENCHMARK(BM_SsGeneralWsrCalibrate);

void BM_GenerateScenario(benchmark::State& state) {
  sim::ScenarioConfig c;
  std::uint64_t trial = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sim::generate_scenario(c, trial++));
}
BENCHMARK(BM_GenerateScenario);

}  // namespace
BENCHMARK_MAIN();
