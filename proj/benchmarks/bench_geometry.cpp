#include <benchmark/benchmark.h>

#include "coronal/geometry.hpp"

namespace {

// Filled disc of radius `rad` pixels.
coronal::PixelSet disc(int r0, int c0, int rad) {
  coronal::PixelSet s;
  for (int r = r0 - rad; r <= r0 + rad; ++r)
    for (int c = c0 - rad; c <= c0 + rad; ++c)
      if ((r - r0) * (r - r0) + (c - c0) * (c - c0) <= rad * rad) s.push_back({r, c});
  return s;
}

void BM_SetDistance(benchmark::State& state) {
  const coronal::GridSpec g(360, 180);
  const int rad = static_cast<int>(state.range(0));
  const auto a = disc(60, 80, rad), b = disc(110, 200, rad);
  for (auto _ : state) benchmark::DoNotOptimize(coronal::set_distance(a, b, g));
  state.counters["pixels"] = static_cast<double>(a.size());
}
BENCHMARK(BM_SetDistance)->Arg(4)->Arg(8)->Arg(16)->Arg(32);

void BM_SetDistanceBruteForce(benchmark::State& state) {
  const coronal::GridSpec g(360, 180);
  const int rad = static_cast<int>(state.range(0));
  const auto a = disc(60, 80, rad), b = disc(110, 200, rad);
  for (auto _ : state) benchmark::DoNotOptimize(coronal::set_distance_bruteforce(a, b, g));
}
BENCHMARK(BM_SetDistanceBruteForce)->Arg(4)->Arg(8)->Arg(16);

}  // namespace
