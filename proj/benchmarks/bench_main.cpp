#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "edffd/aggregator.hpp"
#include "edffd/correlation.hpp"
#include "edffd/ffd.hpp"
#include "edffd/pipeline.hpp"
#include "edffd/sampling.hpp"
#include "edffd/synthetic.hpp"
#include "edffd/tps.hpp"

namespace {

using namespace edffd;

ControlGrid random_grid(int rows, int cols, int w, int h, std::uint64_t seed) {
  ControlGrid g(rows, cols, w, h);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (auto& v : g.displacements()) v = {u(rng), u(rng)};
  return g;
}

// Args: canvas side, grid side, fast path (0/1).
void BM_BSplineField(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const int grid = static_cast<int>(state.range(1));
  const ControlGrid g = random_grid(grid, grid, side, side, 1);
  FieldOptions opts;
  opts.fast = state.range(2) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(bspline_ffd_field(g, opts));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_BSplineField)
    ->ArgsProduct({{256, 512}, {12, 18}, {0, 1}})
    ->Unit(benchmark::kMillisecond);

void BM_EdffdField(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const int grid = static_cast<int>(state.range(1));
  const ControlGrid g = random_grid(grid, grid, side, side, 1);
  FieldOptions opts;
  opts.fast = state.range(2) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(edffd_field(g, 0.75, opts));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_EdffdField)
    ->ArgsProduct({{256, 512}, {12, 18}, {0, 1}})
    ->Unit(benchmark::kMillisecond);

void BM_TpsField(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const int grid = static_cast<int>(state.range(1));
  const ControlGrid g = random_grid(grid, grid, side, side, 1);
  std::vector<Vec2> anchors, targets;
  for (int m = 0; m <= grid; ++m) {
    for (int n = 0; n <= grid; ++n) {
      anchors.push_back(g.anchor(m, n));
      targets.push_back(g.deformed(m, n));
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(tps_field(anchors, targets, side, side));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_TpsField)->ArgsProduct({{256}, {6, 12}})->Unit(benchmark::kMillisecond);

void BM_WarpImage(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const ImageBuffer img = ProceduralTexture(3).render(side, side, 3);
  const DisplacementField f = edffd_field(random_grid(12, 12, side, side, 2), 0.75);
  FourPointMotion m;
  m.d = {Vec2{4, -3}, Vec2{-2, 5}, Vec2{3, 2}, Vec2{-5, -1}};
  const SamplingMap s = compose_sampling_map(four_point_to_homography(m, side, side), std::span(&f, 1), side, side);
  for (auto _ : state) benchmark::DoNotOptimize(warp_image(img, s));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_WarpImage)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ExtractFeatures(benchmark::State& state) {
  const ImageBuffer img = ProceduralTexture(4).render(512, 512, 3);
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(img, d));
}
BENCHMARK(BM_ExtractFeatures)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_GlobalCorrelation(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  SyntheticSpec spec;
  spec.width = spec.height = side;
  const SyntheticPair p = make_synthetic_pair(spec);
  const FeatureMap fr = extract_features(p.reference, 8), ft = extract_features(p.target, 8);
  for (auto _ : state) benchmark::DoNotOptimize(global_correlation(fr, ft, 3));
}
BENCHMARK(BM_GlobalCorrelation)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_LocalCorrelation(benchmark::State& state) {
  SyntheticSpec spec;
  spec.width = spec.height = static_cast<int>(state.range(0));
  const SyntheticPair p = make_synthetic_pair(spec);
  const FeatureMap fr = extract_features(p.reference, 4), ft = extract_features(p.target, 4);
  for (auto _ : state) benchmark::DoNotOptimize(local_correlation(fr, ft, 4));
}
BENCHMARK(BM_LocalCorrelation)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_AsmaForward(benchmark::State& state) {
  const HeadWidths widths{1600, 128, 64, 8};
  const int groups = static_cast<int>(state.range(0));
  const Head head = groups == 1 ? Head(make_mlp_head(widths, 1)) : Head(make_asma_head(widths, groups, 1));
  std::vector<double> x(1600, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(head_forward(x, head));
}
BENCHMARK(BM_AsmaForward)->Arg(1)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_RegisterPair(benchmark::State& state) {
  SyntheticSpec spec;
  spec.width = spec.height = static_cast<int>(state.range(0));
  spec.seed = 5;
  const SyntheticPair p = make_synthetic_pair(spec);
  RegistrationConfig cfg;
  cfg.n_stages = 1;
  for (auto _ : state) benchmark::DoNotOptimize(register_pair(p.reference, p.target, cfg));
}
BENCHMARK(BM_RegisterPair)->Arg(128)->Arg(256)->Unit(benchmark::kSecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
