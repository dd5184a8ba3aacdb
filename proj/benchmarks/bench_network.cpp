#include <benchmark/benchmark.h>

#include <random>

#include "pipenet/simulation.hpp"
#include "pipenet/verify.hpp"

namespace {

using namespace pipenet;

Network three_pipe_network(int cells) {
  std::mt19937_64 rng(21);
  const JunctionProblem problem = make_stationary_problem(rng, 3, 1, false);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Network net;
  net.scheme = JunctionScheme::EntropyMix;
  for (int i = 0; i < problem.size(); ++i) {
    GridPipe pipe;
    pipe.spec = problem.pipes[i];
    pipe.length = 1.0;
    pipe.cells = cells;
    GasState state = problem.traces[i];
    state.p *= 1.0 + 1e-3 * unit(rng);
    pipe.cons.assign(cells, primitive_to_conservative(state, pipe.spec.gas));
    net.pipes.push_back(std::move(pipe));
  }
  return net;
}

void BM_HyperbolicStep(benchmark::State& state) {
  const int cells = static_cast<int>(state.range(0));
  Network net = three_pipe_network(cells);
  const double dt = cfl_dt(net, 0.9);
  for (auto _ : state) {
    Network work = net;
    advance_hyperbolic(work, dt);
    benchmark::DoNotOptimize(work);
  }
  state.SetItemsProcessed(state.iterations() * 3 * cells);
}
BENCHMARK(BM_HyperbolicStep)->Arg(50)->Arg(200)->Arg(800);

void BM_SodTubeRun(benchmark::State& state) {
  TubeScenario sod;
  sod.gas = {1.4, 1.0};
  sod.left = {1.0, 0.0, 1.0};
  sod.right = {0.125, 0.0, 0.1};
  sod.cells = static_cast<int>(state.range(0));
  sod.end_time = 0.2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_tube(sod));
  }
}
BENCHMARK(BM_SodTubeRun)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
