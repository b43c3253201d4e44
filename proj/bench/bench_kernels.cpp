// Serial reference vs OpenMP kernel, and the two exponentiation routes.

#include <benchmark/benchmark.h>

#include <omp.h>

#include <random>

#include "pibits/kernels.hpp"
#include "pibits/modmath.hpp"
#include "pibits/series.hpp"

namespace {

using namespace pibits;

constexpr std::uint64_t kN = 1'000'000;

void BM_SumSerial(benchmark::State& state) {
  const auto& spec = series::bellard().series[0];
  const auto p = static_cast<unsigned>(state.range(0));
  const series::KRange range{0, series::tail_cutoff(spec, kN, p)};
  for (auto _ : state) benchmark::DoNotOptimize(series::sum_series_range(spec, kN, range, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(range.size()));
}
BENCHMARK(BM_SumSerial)->Arg(128)->Arg(320)->Arg(1088)->Unit(benchmark::kMillisecond);

void BM_SumOpenMP(benchmark::State& state) {
  const auto& spec = series::bellard().series[0];
  const auto p = static_cast<unsigned>(state.range(0));
  const auto threads = static_cast<unsigned>(state.range(1));
  const series::KRange range{0, series::tail_cutoff(spec, kN, p)};
  for (auto _ : state) benchmark::DoNotOptimize(kernels::sum_series_range_omp(spec, kN, range, p, threads));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(range.size()));
}
BENCHMARK(BM_SumOpenMP)
    ->ArgsProduct({{128, 320, 1088}, {1, static_cast<long>(omp_get_num_procs())}})
    ->Unit(benchmark::kMillisecond);

void BM_ModPow(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const std::uint64_t m = (rng() >> 1) | 1;
  for (auto _ : state) benchmark::DoNotOptimize(modmath::mod_pow(2, rng() >> 1, m));
}
BENCHMARK(BM_ModPow);

void BM_MontgomeryPow(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const modmath::MontgomeryContext ctx((rng() >> 1) | 1);
  for (auto _ : state) benchmark::DoNotOptimize(modmath::montgomery_pow(ctx, rng() >> 1));
}
BENCHMARK(BM_MontgomeryPow);

// Small moduli, where the dispatch threshold sits.
void BM_Pow2Small(benchmark::State& state) {
  const auto m = static_cast<std::uint64_t>(state.range(0)) | 1;
  std::uint64_t e = 1'000'000;
  for (auto _ : state) benchmark::DoNotOptimize(modmath::mod_pow(2, e++, m));
}
BENCHMARK(BM_Pow2Small)->Arg(1 << 4)->Arg(1 << 8)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);

void BM_MontgomerySmall(benchmark::State& state) {
  const auto m = static_cast<std::uint64_t>(state.range(0)) | 1;
  std::uint64_t e = 1'000'000;
  for (auto _ : state) benchmark::DoNotOptimize(modmath::montgomery_pow(modmath::MontgomeryContext(m), e++));
}
BENCHMARK(BM_MontgomerySmall)->Arg(1 << 4)->Arg(1 << 8)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);

}  // namespace

BENCHMARK_MAIN();
