#include <benchmark/benchmark.h>

#include "koopcheck/dictionaries.hpp"
#include "koopcheck/koopman_fit.hpp"
#include "koopcheck/systems.hpp"

using namespace koopcheck;

namespace {

Box interval(double lo, double hi) { return {Vector::Constant(1, lo), Vector::Constant(1, hi)}; }
Box square(double lo, double hi) { return {Vector::Constant(2, lo), Vector::Constant(2, hi)}; }

const std::vector<FixedPoint>& bistable_fixed_points() {
  static const auto fps =
      find_fixed_points(make_system("bistable"), grid_points(interval(-2, 2), {41}), 1e-12).points;
  return fps;
}

}  // namespace

static void BM_Flow(benchmark::State& state) {
  const auto sys = make_system("duffing", {{"delta", 0.5}});
  Vector x(2);
  x << 1.5, -0.5;
  for (auto _ : state) benchmark::DoNotOptimize(flow(sys, x, 1.0, 1e-10).state);
}
BENCHMARK(BM_Flow);

static void BM_FitEdmd(benchmark::State& state) {
  const auto sys = make_system("duffing", {{"delta", 0.5}});
  const auto pairs = sample_snapshot_pairs(sys, square(-2, 2), static_cast<std::size_t>(state.range(0)), 0.1, 1, 1e-10);
  const auto dict =
      std::make_shared<const Dictionary>(build_rbf_dictionary(sample_rbf_centers(square(-2, 2), 100, 2), 1.0, true));
  for (auto _ : state) benchmark::DoNotOptimize(fit_edmd(pairs, dict).K);
}
BENCHMARK(BM_FitEdmd)->Arg(1000)->Arg(3000)->Unit(benchmark::kMillisecond);

static void BM_Eig(benchmark::State& state) {
  const auto sys = make_system("bistable");
  const auto pairs = sample_snapshot_pairs(sys, interval(-2, 2), 2000, 0.1, 3, 1e-10);
  const auto model = fit_edmd(pairs, std::make_shared<const Dictionary>(build_monomial_dictionary(1, 5)));
  for (auto _ : state) benchmark::DoNotOptimize(eig(model).pairs.size());
}
BENCHMARK(BM_Eig);

static void BM_BasinGrid(benchmark::State& state) {
  const auto sys = make_system("bistable");
  const auto points = grid_points(interval(-2, 2), {static_cast<int>(state.range(0))});
  for (auto _ : state)
    benchmark::DoNotOptimize(compute_basin_grid(sys, points, bistable_fixed_points(), 50.0, 1e-2, 1e-10).labels.size());
}
BENCHMARK(BM_BasinGrid)->Arg(101)->Arg(401)->Unit(benchmark::kMillisecond);

static void BM_IndicatorLookup(benchmark::State& state) {
  const auto sys = make_system("duffing", {{"delta", 0.5}});
  const auto fps = find_fixed_points(sys, grid_points(square(-2, 2), {9, 9}), 1e-12).points;
  const auto grid = compute_basin_grid(sys, grid_points(square(-2, 2), {51, 51}), fps, 50.0, 1e-2, 1e-10);
  const auto src = IndicatorSource::from_basin_grid(grid);
  Rng rng(4);
  std::vector<Vector> queries;
  for (int k = 0; k < 1024; ++k) queries.push_back(uniform_in_box(rng, square(-2.5, 2.5)));
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(src.lookup(queries[k++ & 1023]));
}
BENCHMARK(BM_IndicatorLookup);
BENCHMARK_MAIN();
