// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "cascade/correlation.hpp"
#include "cascade/polarization.hpp"
#include "cascade/simulation.hpp"
#include "cascade/tomography.hpp"

using namespace cascade;

namespace {

const ProjectionRun& run() {
  static const ProjectionRun r = simulate_projection_run(EmitterConfig{}, BasisPair::parse("DD"), 2000000, 1);
  return r;
}

template <auto Kernel>
void BM_Correlate(benchmark::State& state) {
  const auto a = run().xx.timestamps(), b = run().x.timestamps();
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(a, b, 100, -50000, 50000));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.size()));
}
BENCHMARK(BM_Correlate<correlate_range_serial>)->Name("correlate_range/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Correlate<correlate_range>)->Name("correlate_range/parallel")->Unit(benchmark::kMillisecond);

const HistogramSet& histograms() {
  static const HistogramSet set = [] {
    HistogramSet s;
    EmitterConfig c;
    std::uint64_t seed = 10;
    for (const auto& bp : tomography_bases(16)) {
      const ProjectionRun r = simulate_projection_run(c, bp, 200000, seed++);
      s[bp] = correlate_range_serial(r.xx.timestamps(), r.x.timestamps(), 100, 0, 4000);
    }
    return s;
  }();
  return set;
}

template <auto Kernel>
void BM_TimeBinned(benchmark::State& state) {
  const HistogramSet& h = histograms();
  TimeBinnedOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(h, opts));
}
BENCHMARK(BM_TimeBinned<time_binned_tomography_serial>)->Name("time_binned_tomography/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TimeBinned<time_binned_tomography>)->Name("time_binned_tomography/parallel")->Unit(benchmark::kMillisecond);

template <auto Kernel>
void BM_Bootstrap(benchmark::State& state) {
  const TomographyInput in = split_time_bins(histograms(), 400).front();
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(in, 32, Metric::kFidelity, PureState2Q::phi_plus(), 7, MleOptions{}));
}
BENCHMARK(BM_Bootstrap<bootstrap_uncertainty_serial>)->Name("bootstrap/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bootstrap<bootstrap_uncertainty>)->Name("bootstrap/parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
