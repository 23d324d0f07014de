#include <benchmark/benchmark.h>

#include <spinmetro/analytic.hpp>
#include <spinmetro/schedule.hpp>

using namespace spinmetro;

static void BM_BuildSchedule(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const int depth = static_cast<int>(st.range(1));
  for (auto _ : st) benchmark::DoNotOptimize(build_schedule(n, depth, 0.7));
}
BENCHMARK(BM_BuildSchedule)->ArgsProduct({{1000, 4000}, {1, 2, 3}})->Unit(benchmark::kMillisecond);

static void BM_PrepareState(benchmark::State& st) {
  const auto s = build_schedule(static_cast<int>(st.range(0)), 2, 0.7);
  for (auto _ : st) benchmark::DoNotOptimize(prepare_state(s));
}
BENCHMARK(BM_PrepareState)->Arg(1000)->Arg(4000)->Arg(8000)->Unit(benchmark::kMillisecond);

static void BM_SolveState1(benchmark::State& st) {
  double xi2 = 0.01;
  for (auto _ : st) {
    benchmark::DoNotOptimize(solve_state1(2000, xi2));
    xi2 = xi2 == 0.01 ? 0.011 : 0.01;
  }
}
BENCHMARK(BM_SolveState1);

BENCHMARK_MAIN();
