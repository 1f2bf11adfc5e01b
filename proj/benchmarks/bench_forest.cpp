#include <random>

#include <benchmark/benchmark.h>

#include "coronal/forest.hpp"

using namespace coronal::forest;

namespace {

Dataset make_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> x(0, 1);
  Dataset d(6);
  std::vector<double> row(6);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row) v = x(rng);
    d.add(row, row[3] + 0.5 * row[4] + 0.3 * x(rng) > 0 ? 1 : 0);
  }
  return d;
}

void BM_Train(benchmark::State& state) {
  const auto data = make_data(static_cast<std::size_t>(state.range(0)), 11);
  ForestConfig cfg;
  cfg.threads = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(train(data, cfg).oob_error);
}
BENCHMARK(BM_Train)->Args({240, 1})->Args({2000, 1})->Args({2000, 4})->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const auto data = make_data(2000, 11);
  const auto forest = train(data, ForestConfig{});
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(forest, data.row(i)).label);
    i = (i + 1) % data.rows();
  }
}
BENCHMARK(BM_Predict);

}  // namespace
