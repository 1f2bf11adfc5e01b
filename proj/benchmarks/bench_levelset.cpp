#include <random>

#include <benchmark/benchmark.h>

#include "coronal/levelset.hpp"

using namespace coronal;

namespace {

struct Scene {
  SynopticMap euv, mag;
  SegmentationMask init;
};

Scene make_scene(int cols, int rows) {
  const GridSpec g(cols, rows);
  Scene s{SynopticMap(g, MapKind::Euv), SynopticMap(g, MapKind::Magnetic), SegmentationMask(g)};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0, 1);
  const int rad = rows / 6;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      s.euv.observed(r, c) = s.mag.observed(r, c) = 1;
      const bool dark = (r - rows / 2) * (r - rows / 2) + (c - cols / 3) * (c - cols / 3) <= rad * rad;
      s.euv.values(r, c) = (dark ? 40.0 : 100.0) + noise(rng);
      s.mag.values(r, c) = (c < cols / 2 ? 5.0 : -5.0) + noise(rng);
      if ((r - rows / 2) * (r - rows / 2) + (c - cols / 3) * (c - cols / 3) <= (rad - 3) * (rad - 3))
        s.init.labels(r, c) = Label::Positive;
    }
  return s;
}

void BM_EvolveStep(benchmark::State& state) {
  const int cols = static_cast<int>(state.range(0));
  const auto s = make_scene(cols, cols / 2);
  levelset::Params p;
  p.n_iters = 10;
  const Field pg(cols / 2, cols, 0.5);
  const auto phi0 = levelset::initial_field(s.init);
  for (auto _ : state) benchmark::DoNotOptimize(levelset::evolve(phi0, pg, p).phi[0]);
  state.SetItemsProcessed(state.iterations() * p.n_iters * static_cast<std::int64_t>(cols) * (cols / 2));
}
BENCHMARK(BM_EvolveStep)->Arg(120)->Arg(360)->Unit(benchmark::kMillisecond);

void BM_Segment(benchmark::State& state) {
  const auto s = make_scene(360, 180);
  levelset::Params p;
  p.alpha = -1.0;
  for (auto _ : state) benchmark::DoNotOptimize(levelset::segment(s.euv, s.mag, s.init, p).hole_count());
}
BENCHMARK(BM_Segment)->Unit(benchmark::kMillisecond);

void BM_EdgeFunction(benchmark::State& state) {
  const auto s = make_scene(360, 180);
  for (auto _ : state) benchmark::DoNotOptimize(levelset::edge_function(s.euv, 0.5)[0]);
}
BENCHMARK(BM_EdgeFunction)->Unit(benchmark::kMillisecond);

}  // namespace
