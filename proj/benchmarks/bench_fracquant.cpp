#include <benchmark/benchmark.h>

#include <string>

#include "fracquant/config.hpp"
#include "fracquant/dim_solver.hpp"
#include "fracquant/measure.hpp"
#include "fracquant/partition_bounds.hpp"
#include "fracquant/quantizer.hpp"

namespace {

using namespace fracquant;

Measure load(const std::string& name) {
  return Measure::create(
      load_config(std::string(FRACQUANT_CONFIG_DIR) + "/" + name + ".cfg").spec);
}

void BM_SolveCantor(benchmark::State& state) {
  const auto m = load("cantor");
  for (auto _ : state) benchmark::DoNotOptimize(solve_dimension(m, 2.0));
}
BENCHMARK(BM_SolveCantor);

void BM_SolveCarpet(benchmark::State& state) {
  const auto m = load("carpet_m2n3");
  for (auto _ : state) benchmark::DoNotOptimize(solve_dimension(m, 2.0));
}
BENCHMARK(BM_SolveCarpet);

void BM_SolveMarkov(benchmark::State& state) {
  const auto m = load("markov_incomparable");
  for (auto _ : state) benchmark::DoNotOptimize(solve_dimension(m, 2.0));
}
BENCHMARK(BM_SolveMarkov);

void BM_SolveMultiscale(benchmark::State& state) {
  const auto m = load("multiscale_period2");
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_multiscale(m, 2.0, state.range(0)));
}
BENCHMARK(BM_SolveMultiscale)->Arg(50)->Arg(200);

void BM_Sample(benchmark::State& state) {
  const auto m = load("sierpinski");
  for (auto _ : state)
    benchmark::DoNotOptimize(sample(m, state.range(0), 0, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sample)->Arg(10000)->Arg(100000);

void BM_OptimizeLine(benchmark::State& state) {
  const auto m = load("cantor");
  const auto cloud = sample(m, 20000, 0, 1);
  OptimizeOptions opts;
  opts.seed = 1;
  const double r = state.range(1) / 2.0;
  for (auto _ : state)
    benchmark::DoNotOptimize(optimize(cloud.points, state.range(0), r, opts));
}
BENCHMARK(BM_OptimizeLine)
    ->Args({8, 4})
    ->Args({32, 4})
    ->Args({8, 2})
    ->Args({8, 3})
    ->Unit(benchmark::kMillisecond);

void BM_OptimizePlane(benchmark::State& state) {
  const auto m = load("sierpinski");
  const auto cloud = sample(m, 5000, 0, 1);
  OptimizeOptions opts;
  opts.seed = 1;
  const double r = state.range(1) / 2.0;
  for (auto _ : state)
    benchmark::DoNotOptimize(optimize(cloud.points, state.range(0), r, opts));
}
BENCHMARK(BM_OptimizePlane)
    ->Args({9, 4})
    ->Args({9, 2})
    ->Args({9, 3})
    ->Unit(benchmark::kMillisecond);

void BM_BoundsTable(benchmark::State& state) {
  const auto m = load("carpet_m2n3");
  BoundsOptions opts;
  opts.levels = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(bounds_table(m, 2.0, opts));
}
BENCHMARK(BM_BoundsTable)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
