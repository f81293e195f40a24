#include <benchmark/benchmark.h>

#include <vector>

#include "drcurve/nuisance.hpp"
#include "drcurve/simulate.hpp"
#include "drcurve/smoothing.hpp"

using namespace drcurve;

namespace {

const Dataset& data() {
  static const Dataset d = sim::generate_data(20000, 1);
  return d;
}

std::vector<double> grid(std::size_t points) {
  std::vector<double> g(points);
  for (std::size_t k = 0; k < points; ++k) g[k] = 1.0 + 14.0 * double(k) / double(points - 1);
  return g;
}

void BM_SmoothSerial(benchmark::State& state) {
  const auto& d = data();
  const auto g = grid(201);
  const KernelSpec spec(1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(serial::smooth_at(d.treatment(), d.outcome(), g, spec));
  }
}

void BM_SmoothParallel(benchmark::State& state) {
  const auto& d = data();
  const auto g = grid(201);
  const KernelSpec spec(1.0);
  set_thread_count(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const SortedDesign design(d.treatment(), d.outcome());
    benchmark::DoNotOptimize(smooth_at(design, g, spec));
  }
}

void BM_AverageDensitySerial(benchmark::State& state) {
  const auto& d = data();
  const auto g = grid(101);
  const auto dens = sim::true_density();
  for (auto _ : state) {
    benchmark::DoNotOptimize(serial::average_density(*dens, d.covariates(), g, 1e-5));
  }
}

void BM_AverageDensityParallel(benchmark::State& state) {
  const auto& d = data();
  const auto g = grid(101);
  const auto dens = sim::true_density();
  set_thread_count(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(average_density(*dens, d.covariates(), g, 1e-5));
  }
}

}  // namespace

BENCHMARK(BM_SmoothSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SmoothParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AverageDensitySerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AverageDensityParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
