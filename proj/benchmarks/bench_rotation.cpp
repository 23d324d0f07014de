#include <benchmark/benchmark.h>

#include <spinmetro/moments.hpp>
#include <spinmetro/spinstate.hpp>

using namespace spinmetro;

static void BM_RotateX(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const auto method = st.range(1) ? RotationMethod::chebyshev : RotationMethod::eigenbasis;
  const auto s = apply_twist(coherent_x(n), 0.01);
  RotationCache::shared(n);  // warm the eigenbasis outside the timed loop
  for (auto _ : st) benchmark::DoNotOptimize(apply_rotation(s, Axis::x, 0.7, method));
}
BENCHMARK(BM_RotateX)->ArgsProduct({{250, 500, 1000, 2000}, {0, 1}})->Unit(benchmark::kMicrosecond);

static void BM_Twist(benchmark::State& st) {
  const auto s = coherent_x(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(apply_twist(s, 0.013));
}
BENCHMARK(BM_Twist)->Range(256, 16384)->Unit(benchmark::kMicrosecond);

static void BM_Moments(benchmark::State& st) {
  const auto s = apply_twist(coherent_x(static_cast<int>(st.range(0))), 0.01);
  for (auto _ : st) benchmark::DoNotOptimize(compute_moments(s, true));
}
BENCHMARK(BM_Moments)->Range(256, 16384)->Unit(benchmark::kMicrosecond);

static void BM_EigenbasisBuild(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(RotationCache(n).bytes());
}
BENCHMARK(BM_EigenbasisBuild)->Arg(250)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
