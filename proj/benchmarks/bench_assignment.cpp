#include <random>

#include <benchmark/benchmark.h>

#include "coronal/assignment.hpp"

namespace {

coronal::CostMatrix random_costs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> w(0, 1'000'000);
  coronal::CostMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = w(rng);
  return m;
}

void BM_Hungarian(benchmark::State& state) {
  const auto m = random_costs(static_cast<std::size_t>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(coronal::solve_assignment(m).total);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(4, 256)->Complexity(benchmark::oNCubed);

void BM_BruteForce(benchmark::State& state) {
  const auto m = random_costs(static_cast<std::size_t>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(coronal::brute_force_assignment(m).total);
}
BENCHMARK(BM_BruteForce)->DenseRange(2, 8);

}  // namespace
