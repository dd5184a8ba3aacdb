#include <benchmark/benchmark.h>

#include "pipenet/riemann.hpp"
#include "pipenet/simulation.hpp"

namespace {

using namespace pipenet;

const GasParams kAir{1.4, 1.0};
const GasState kSodLeft{1.0, 0.0, 1.0};
const GasState kSodRight{0.125, 0.0, 0.1};

void BM_SolveStarSod(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_star(kSodLeft, kSodRight, kAir));
  }
}
BENCHMARK(BM_SolveStarSod);

void BM_SolveStarEqualStates(benchmark::State& state) {
  const GasState s{1.3, 0.4, 1.1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_star(s, s, kAir));
  }
}
BENCHMARK(BM_SolveStarEqualStates);

void BM_GodunovInterfaceFlux(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(godunov_interface_flux(kSodLeft, kSodRight, kAir));
  }
}
BENCHMARK(BM_GodunovInterfaceFlux);

void BM_SampleWaveFan(benchmark::State& state) {
  const WaveFan fan = build_wave_fan(kSodLeft, kSodRight, kAir);
  double xi = -2.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_wave_fan(fan, xi, kAir));
    xi = xi < 2.0 ? xi + 0.01 : -2.0;
  }
}
BENCHMARK(BM_SampleWaveFan);

}  // namespace

BENCHMARK_MAIN();
