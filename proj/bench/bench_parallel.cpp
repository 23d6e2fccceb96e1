// Serial reference against the OpenMP kernels. Arg 0 is serial, 1 parallel.

#include <benchmark/benchmark.h>

#include <random>

#include "sheetcap/capacity.hpp"
#include "sheetcap/density.hpp"
#include "sheetcap/hitting.hpp"
#include "sheetcap/montecarlo.hpp"

using namespace sheetcap;

namespace {

Execution mode(const benchmark::State& state) { return state.range(0) ? Execution::Parallel : Execution::Serial; }

std::vector<double> cloud(std::size_t n, int d, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> p(n * static_cast<std::size_t>(d));
  for (double& v : p) v = nd(eng);
  return p;
}

void BM_Energy(benchmark::State& state) {
  const auto disc = discretize(CompactSet::ball({0, 0, 0}, 1.0), 16);
  const DiscreteMeasure mu = uniform_measure(3, disc.points, disc.cell_size);
  const RieszKernel k(1.0, 3);
  for (auto _ : state) benchmark::DoNotOptimize(energy(k, mu, DiagonalMode::CellRegularized, mode(state)));
}
BENCHMARK(BM_Energy)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_KernelColumn(benchmark::State& state) {
  const auto disc = discretize(CompactSet::ball({0, 0, 0}, 1.0), 32);
  const KernelMatrix km(RieszKernel(1.0, 3), disc.points, disc.cell_size);
  std::vector<double> col(km.size());
  std::size_t j = 0;
  for (auto _ : state) {
    km.column(j, col, mode(state));
    j = (j + 97) % km.size();
    benchmark::DoNotOptimize(col.data());
  }
}
BENCHMARK(BM_KernelColumn)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_KernelDense(benchmark::State& state) {
  const auto disc = discretize(CompactSet::ball({0, 0, 0}, 1.0), 12);
  const KernelMatrix km(RieszKernel(1.0, 3), disc.points, disc.cell_size);
  for (auto _ : state) benchmark::DoNotOptimize(km.dense(mode(state)));
}
BENCHMARK(BM_KernelDense)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Kde(benchmark::State& state) {
  const auto samples = cloud(200000, 2, 1);
  const auto h = bandwidths(samples, 2, BandwidthPolicy{});
  const auto points = radial_evaluation_set(2, 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(kde(samples, 2, h, points, mode(state)));
}
BENCHMARK(BM_Kde)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_HitProb(benchmark::State& state) {
  const Grid g = Grid::windowed(2, 1.0, 2.0, 4, 32);
  const auto src = PathSource::gaussian(CovarianceModel::brownian_sheet(), g, 3);
  const auto set = CompactSet::ball({0.5, 0.0, 0.0}, 0.3);
  for (auto _ : state)
    benchmark::DoNotOptimize(estimate_hit_prob(src, set, Window{1.0, 2.0}, 500, 0.05, 1, mode(state)));
}
BENCHMARK(BM_HitProb)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
