#include <benchmark/benchmark.h>

#include <vector>

#include "hcran/parallel.hpp"

namespace {

void sweep(benchmark::State& state, int workers) {
    const hcran::SweepWorkload work({10, static_cast<std::size_t>(state.range(0)), 20}, 7);
    std::vector<double> out(work.tasks());
    for (auto _ : state) {
        work.run(workers, out);
        benchmark::DoNotOptimize(out.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(work.tasks()));
}

void BM_SerialSweep(benchmark::State& state) { sweep(state, 1); }
void BM_ParallelSweep(benchmark::State& state) { sweep(state, hcran::hardware_workers()); }

BENCHMARK(BM_SerialSweep)->RangeMultiplier(2)->Range(64, 1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ParallelSweep)->RangeMultiplier(2)->Range(64, 1024)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
