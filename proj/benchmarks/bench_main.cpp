// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "thermocal/gp.hpp"
#include "thermocal/spatial.hpp"
#include "thermocal/synth.hpp"
#include "thermocal/temporal.hpp"
#include "thermocal/tracker.hpp"

using namespace thermocal;

namespace {

CorrespondenceSet make_set(FrameIndex from, FrameIndex to, std::size_t n, double outliers, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.05, 0.95);
  std::normal_distribution<double> noise(0.0, 0.01);
  const RelativeParams truth = RelativeParams::from_scale(1.3, 0.05, from, to);
  CorrespondenceSet set{from, to, {}};
  for (std::size_t k = 0; k < n; ++k) {
    const double i = uni(rng);
    double j = apply_forward(truth, i) + noise(rng);
    if (k < outliers * n) j = uni(rng);
    set.pairs.push_back({i, j, {1.0, 1.0}, {1.0, 1.0}});
  }
  return set;
}

std::vector<DifferenceConstraint> grid_constraints(const GridSpec& grid, std::size_t n) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cell(0, static_cast<int>(grid.cell_count()) - 1);
  std::uniform_int_distribution<int> step(-3, 3);
  std::vector<double> truth(grid.cell_count());
  for (std::size_t c = 0; c < truth.size(); ++c) truth[c] = 0.1 * std::sin(0.2 * static_cast<double>(c));
  std::vector<DifferenceConstraint> out;
  while (out.size() < n) {
    const int a = cell(rng);
    const int ax = a % grid.cells_x;
    const int ay = a / grid.cells_x;
    const int bx = std::clamp(ax + step(rng), 0, grid.cells_x - 1);
    const int by = std::clamp(ay + step(rng), 0, grid.cells_y - 1);
    const int b = by * grid.cells_x + bx;
    if (a == b) continue;
    out.push_back({a, b, truth[a] - truth[b], 1.0});
  }
  return out;
}

void BM_RansacEstimate(benchmark::State& state) {
  const auto set = make_set(0, 1, static_cast<std::size_t>(state.range(0)), 0.2, 1);
  RansacConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(ransac_estimate(set, cfg));
}
BENCHMARK(BM_RansacEstimate)->Arg(200)->Arg(1000);

void BM_ProcessFrame1000(benchmark::State& state) {
  std::vector<CorrespondenceSet> sets;
  for (FrameIndex i = 0; i < 5; ++i) sets.push_back(make_set(i, 5, 200, 0.2, 10 + i));
  ParamChain base(0);
  for (FrameIndex t = 1; t < 5; ++t) base.push_back({0.0, 0.0, 0, t});
  for (auto _ : state) {
    ParamChain chain = base;
    benchmark::DoNotOptimize(process_frame(5, sets, chain, RansacConfig{}, DriftConfig{}));
  }
}
BENCHMARK(BM_ProcessFrame1000)->Unit(benchmark::kMillisecond);

void BM_SpatialSolve32(benchmark::State& state) {
  const GridSpec grid{32, 32, 640, 512};
  const auto constraints = grid_constraints(grid, 10000);
  for (auto _ : state) {
    const auto components = connected_components(constraints, grid);
    benchmark::DoNotOptimize(solve_spatial(constraints, components, grid));
  }
}
BENCHMARK(BM_SpatialSolve32)->Unit(benchmark::kMillisecond);

void BM_GpComplete(benchmark::State& state) {
  const GridSpec grid{32, 32, 640, 512};
  SpatialField field = SpatialField::zeros(grid);
  std::mt19937_64 rng(3);
  std::bernoulli_distribution keep(static_cast<double>(state.range(0)) / 100.0);
  for (std::size_t c = 0; c < field.r.size(); ++c) {
    if (!keep(rng)) continue;
    field.r[c] = 0.05 * std::cos(0.1 * static_cast<double>(c));
    field.source[c] = CellSource::Solved;
  }
  const GpConfig cfg = GpConfig::for_width(grid.width);
  for (auto _ : state) benchmark::DoNotOptimize(complete_field(field, cfg));
}
BENCHMARK(BM_GpComplete)->Arg(30)->Arg(70)->Unit(benchmark::kMillisecond);

void BM_TrackFrame(benchmark::State& state) {
  const Image scene = value_noise(400, 300, 9);
  Image prev(320, 256);
  Image next(320, 256);
  for (int y = 0; y < 256; ++y) {
    for (int x = 0; x < 320; ++x) {
      prev(x, y) = scene(x + 20, y + 20);
      next(x, y) = scene(x + 22, y + 19);
    }
  }
  const TrackerConfig cfg;
  const auto points = detect_features(prev, cfg);
  const Pyramid p0(prev, cfg.pyramid_levels);
  const Pyramid p1(next, cfg.pyramid_levels);
  for (auto _ : state) benchmark::DoNotOptimize(track_points(p0, p1, points, cfg));
  state.counters["points"] = static_cast<double>(points.size());
}
BENCHMARK(BM_TrackFrame)->Unit(benchmark::kMillisecond);

void BM_DetectFeatures(benchmark::State& state) {
  const Image image = value_noise(320, 256, 4);
  const TrackerConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(detect_features(image, cfg));
}
BENCHMARK(BM_DetectFeatures)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
