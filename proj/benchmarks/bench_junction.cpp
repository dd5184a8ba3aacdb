#include <benchmark/benchmark.h>

#include <random>

#include "pipenet/junction.hpp"
#include "pipenet/verify.hpp"

namespace {

using namespace pipenet;

JunctionProblem perturbed_problem(int n_pipes, int n_out) {
  std::mt19937_64 rng(99 + n_pipes);
  JunctionProblem problem = make_stationary_problem(rng, n_pipes, n_out, false);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (GasState& trace : problem.traces) trace.p *= 1.0 + 1e-3 * unit(rng);
  return problem;
}

void BM_SolveJunction(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const JunctionProblem problem = perturbed_problem(n, n / 2 > 0 ? n / 2 : 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_junction(problem));
  }
}
BENCHMARK(BM_SolveJunction)->Arg(2)->Arg(3)->Arg(4)->Arg(6);

void BM_SolveJunctionStationary(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const JunctionProblem problem = make_stationary_problem(rng, 3, 1, false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_junction(problem));
  }
}
BENCHMARK(BM_SolveJunctionStationary);

void BM_CouplingJacobian(benchmark::State& state) {
  std::mt19937_64 rng(11);
  const CanonicalJunction junction =
      canonicalize(make_stationary_problem(rng, 4, 2, false));
  const CouplingParams params = initial_params(junction);
  for (auto _ : state) {
    benchmark::DoNotOptimize(coupling_jacobian(junction, params));
  }
}
BENCHMARK(BM_CouplingJacobian);

}  // namespace

BENCHMARK_MAIN();
