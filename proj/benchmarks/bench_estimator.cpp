#include <benchmark/benchmark.h>

#include <spinmetro/estimator.hpp>

using namespace spinmetro;

static void BM_ErrorExact(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const int m = static_cast<int>(st.range(1));
  ProtocolOptions o;
  o.c = m == 3 ? 0.35 : 0.7;
  const auto p = build_protocol(n, m, 0.1, o);
  for (auto _ : st) benchmark::DoNotOptimize(error_exact(p).delta_phi2);
}
BENCHMARK(BM_ErrorExact)
    ->Args({1000, 2})
    ->Args({4000, 2})
    ->Args({1000, 3})
    ->Args({2000, 3})
    ->Unit(benchmark::kMillisecond);

static void BM_ErrorMonteCarlo(benchmark::State& st) {
  ProtocolOptions o;
  o.c = 0.35;
  o.mode = EstimatorMode::monte_carlo;
  o.mc.samples = static_cast<int>(st.range(0));
  o.mc.seed = 1;
  const auto p = build_protocol(600, 3, 0.1, o);
  for (auto _ : st) benchmark::DoNotOptimize(error_monte_carlo(p).delta_phi2);
}
BENCHMARK(BM_ErrorMonteCarlo)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

static void BM_BuildProtocol(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(build_protocol(3000, 3, 0.1));
}
BENCHMARK(BM_BuildProtocol)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
