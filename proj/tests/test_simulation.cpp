#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pipenet/simulation.hpp"
#include "pipenet/verify.hpp"
#include "support/oracles.hpp"

using namespace pipenet;

namespace {

const GasParams kAir{1.4, 1.0};
const GasState kSodLeft{1.0, 0.0, 1.0};
const GasState kSodRight{0.125, 0.0, 0.1};

GridPipe uniform_pipe(const PipeSpec& spec, const GasState& state, int cells,
                      double length) {
  GridPipe pipe;
  pipe.spec = spec;
  pipe.length = length;
  pipe.cells = cells;
  pipe.cons.assign(cells, primitive_to_conservative(state, spec.gas));
  return pipe;
}

Network network_from_problem(const JunctionProblem& problem, int cells,
                             double length) {
  Network net;
  net.scheme = JunctionScheme::EntropyMix;
  for (int i = 0; i < problem.size(); ++i) {
    net.pipes.push_back(
        uniform_pipe(problem.pipes[i], problem.traces[i], cells, length));
  }
  return net;
}

bool networks_equal(const Network& a, const Network& b) {
  for (size_t i = 0; i < a.pipes.size(); ++i) {
    for (int j = 0; j < a.pipes[i].cells; ++j) {
      for (int c = 0; c < 3; ++c) {
        if (a.pipes[i].cons[j][c] != b.pipes[i].cons[j][c]) return false;
      }
    }
  }
  return true;
}

}  // namespace

TEST_CASE("godunov interface flux is consistent") {
  const GasState s{1.3, 0.25, 0.8};
  const Vec3 flux = godunov_interface_flux(s, s, kAir);
  const Vec3 exact = physical_flux(s, kAir);
  CHECK(flux[0] == exact[0]);
  CHECK(flux[1] == exact[1]);
  CHECK(flux[2] == exact[2]);
}

TEST_CASE("godunov interface flux matches the oracle on the Sod pair") {
  const Vec3 flux = godunov_interface_flux(kSodLeft, kSodRight, kAir);
  const GasState want = oracle::exact_sample(kSodLeft, kSodRight, kAir.gamma, 0.0);
  const Vec3 ref = physical_flux(want, kAir);
  for (int c = 0; c < 3; ++c) {
    CHECK(flux[c] == doctest::Approx(ref[c]).epsilon(1e-10));
  }
}

TEST_CASE("godunov flux reflection symmetry") {
  std::mt19937_64 rng(151);
  int done = 0;
  while (done < 200) {
    const GasState l = random_subsonic_state(rng, kAir);
    const GasState r = random_subsonic_state(rng, kAir);
    Vec3 flux, mirrored;
    try {
      flux = godunov_interface_flux(l, r, kAir);
      mirrored = godunov_interface_flux(mirror(r), mirror(l), kAir);
    } catch (const VacuumError&) {
      continue;
    }
    const Vec3 expect = mirror_flux(flux);
    for (int c = 0; c < 3; ++c) {
      CHECK(mirrored[c] ==
            doctest::Approx(expect[c]).epsilon(1e-12).scale(1.0));
    }
    ++done;
  }
}

TEST_CASE("cfl_dt") {
  PipeSpec spec{1.0, kAir, "a"};
  const GasState still{1.0, 0.0, 1.0};
  Network net;
  net.pipes.push_back(uniform_pipe(spec, still, 10, 1.0));
  const double c = sound_speed(still, kAir);
  CHECK(cfl_dt(net, 0.5) == doctest::Approx(0.5 * 0.1 / c).epsilon(1e-14));

  Network finer = net;
  finer.pipes[0].cells = 20;
  finer.pipes[0].cons.assign(20, primitive_to_conservative(still, kAir));
  CHECK(cfl_dt(finer, 0.5) ==
        doctest::Approx(0.5 * cfl_dt(net, 0.5)).epsilon(1e-14));

  // The fastest wave governs.
  const GasState fast{1.0, 0.9, 2.5};
  net.pipes.push_back(uniform_pipe({1.0, kAir, "b"}, fast, 10, 1.0));
  const double speed =
      std::max(std::abs(fast.u - sound_speed(fast, kAir)),
               std::abs(fast.u + sound_speed(fast, kAir)));
  CHECK(cfl_dt(net, 0.5) == doctest::Approx(0.5 * 0.1 / speed).epsilon(1e-14));
}

TEST_CASE("constant stationary network is a bitwise fixed point") {
  std::mt19937_64 rng(157);
  const JunctionProblem problem = make_stationary_problem(rng, 3, 1, false);
  Network net = network_from_problem(problem, 8, 1.0);
  const Network before = net;
  for (int step = 0; step < 50; ++step) {
    advance_hyperbolic(net, 1e-3);
  }
  CHECK(networks_equal(net, before));
}

TEST_CASE("per-step change equals the net boundary flux") {
  std::mt19937_64 rng(163);
  JunctionProblem problem = make_stationary_problem(rng, 3, 1, false);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (GasState& trace : problem.traces) trace.p *= 1.0 + 1e-2 * unit(rng);
  Network net = network_from_problem(problem, 16, 1.0);

  for (int step = 0; step < 20; ++step) {
    const ConservationTotals before = totals_of(net);
    const double dt = cfl_dt(net, 0.8);
    const StepInfo info = advance_hyperbolic(net, dt);
    const ConservationTotals after = totals_of(net);
    double flux_mass = 0.0, flux_energy = 0.0;
    for (size_t i = 0; i < net.pipes.size(); ++i) {
      const double nu = net.pipes[i].spec.nu_norm;
      flux_mass += nu * (info.junction_flux[i][0] - info.far_end_flux[i][0]);
      flux_energy += nu * (info.junction_flux[i][2] - info.far_end_flux[i][2]);
    }
    CHECK(after.mass - before.mass ==
          doctest::Approx(dt * flux_mass).epsilon(1e-12));
    CHECK(after.energy - before.energy ==
          doctest::Approx(dt * flux_energy).epsilon(1e-12));
    // Junction flux sums balance every step in entropy-mix mode.
    CHECK(info.junction_balance.mass_rel <= 1e-9);
    CHECK(info.junction_balance.energy_rel <= 1e-9);
    CHECK(info.junction_balance.entropy_rel <= 1e-9);
  }
}

TEST_CASE("vacuum forming inside a pipe surfaces as an error") {
  PipeSpec spec{1.0, kAir, "a"};
  GridPipe pipe = uniform_pipe(spec, {1.0, 0.0, 1.0}, 8, 1.0);
  // Two groups of cells pulling apart beyond the non-vacuum bound.
  for (int j = 0; j < 4; ++j) {
    pipe.cons[j] = primitive_to_conservative({1.0, -6.0, 1.0}, kAir);
  }
  for (int j = 4; j < 8; ++j) {
    pipe.cons[j] = primitive_to_conservative({1.0, 6.0, 1.0}, kAir);
  }
  Network net;
  net.scheme = JunctionScheme::MergedPair;
  net.pipes = {pipe, pipe};
  CHECK_THROWS_AS(advance_hyperbolic(net, 1e-4), VacuumError);
}

TEST_CASE("inactive source is a no-op") {
  std::mt19937_64 rng(167);
  const JunctionProblem problem = make_stationary_problem(rng, 3, 1, false);
  Network net = network_from_problem(problem, 8, 1.0);
  const Network before = net;
  advance_source(net, 0.1, SourceModel{});
  CHECK(networks_equal(net, before));
}

TEST_CASE("friction source matches the closed-form decay to O(dt^2)") {
  const SourceModel model{0.0, 0.5, 0.25};
  const double k = model.friction_factor / (2.0 * model.diameter);
  const GasState start{1.2, 0.8, 1.5};
  const double q0 = mass_flux(start);

  auto error_at = [&](double dt) {
    Network net;
    net.pipes.push_back(uniform_pipe({1.0, kAir, "a"}, start, 4, 1.0));
    const double t_end = 0.4;
    const int steps = static_cast<int>(std::round(t_end / dt));
    for (int s = 0; s < steps; ++s) advance_source(net, dt, model);
    const double q_exact = oracle::friction_decay(q0, k / start.rho, t_end);
    return std::abs(net.pipes[0].cons[0][1] - q_exact);
  };
  const double e1 = error_at(0.02);
  const double e2 = error_at(0.01);
  const double e4 = error_at(0.005);
  CHECK(e1 / e2 > 3.0);  // second order: halving dt quarters the error
  CHECK(e2 / e4 > 3.0);
  CHECK(e1 <= 1e-3);
}

TEST_CASE("gravity on still gas accelerates at -g and keeps E to O(dt^2)") {
  const SourceModel model{2.5, 0.0, 1.0};
  const GasState start{1.0, 0.0, 1.0};
  Network net;
  net.pipes.push_back(uniform_pipe({1.0, kAir, "a"}, start, 4, 1.0));
  const double dt = 1e-4;
  const double e0 = net.pipes[0].cons[0][2];
  advance_source(net, dt, model);
  const GasState after = net.pipes[0].cell_state(0);
  CHECK(after.u == doctest::Approx(-model.gravity * dt).epsilon(1e-8));
  CHECK(std::abs(net.pipes[0].cons[0][2] - e0) <=
        2.0 * model.gravity * model.gravity * dt * dt);
}

TEST_CASE("strang step is source halves around the hyperbolic step") {
  std::mt19937_64 rng(173);
  const JunctionProblem problem = make_stationary_problem(rng, 3, 1, false);
  const SourceModel model{0.3, 0.2, 1.0};
  Network a = network_from_problem(problem, 8, 1.0);
  Network b = a;
  const double dt = 1e-3;
  advance_step(a, dt, model, Splitting::Strang);
  advance_source(b, 0.5 * dt, model);
  advance_hyperbolic(b, dt);
  advance_source(b, 0.5 * dt, model);
  CHECK(networks_equal(a, b));
}

TEST_CASE("two-pipe entropy-mix network follows the merged tube, cell for cell") {
  std::mt19937_64 rng(179);
  const JunctionProblem pair = make_mirrored_pair(rng);
  const GasParams& gas = pair.pipes[0].gas;
  const int m = 40;
  const double length = 1.0;

  Network net;
  net.scheme = JunctionScheme::EntropyMix;
  net.pipes.push_back(uniform_pipe(pair.pipes[0], pair.traces[0], m, length));
  net.pipes.push_back(uniform_pipe(pair.pipes[1], pair.traces[1], m, length));

  TubeScenario merged;
  merged.gas = gas;
  merged.left = mirror(pair.traces[1]);
  merged.right = pair.traces[0];
  merged.x_min = -length;
  merged.x_max = length;
  merged.cells = 2 * m;
  TubeState tube = make_tube(merged);

  for (int step = 0; step < 20; ++step) {
    const double dt = std::min(cfl_dt(net, 0.9), tube_cfl_dt(tube, 0.9));
    advance_hyperbolic(net, dt);
    tube_advance(tube, dt);
    for (int j = 0; j < m; ++j) {
      for (int c = 0; c < 3; ++c) {
        // Pipe 1 is the right half of the tube, pipe 2 the mirrored left.
        const double right = tube.cons[m + j][c];
        CHECK(std::abs(net.pipes[0].cons[j][c] - right) <=
              1e-12 * std::max(1.0, std::abs(right)));
        const double left = tube.cons[m - 1 - j][c];
        const double mirrored = c == 1 ? -left : left;
        CHECK(std::abs(net.pipes[1].cons[j][c] - mirrored) <=
              1e-12 * std::max(1.0, std::abs(mirrored)));
      }
    }
  }
}

TEST_CASE("merged-pair scheme reproduces the tube bitwise") {
  PipeSpec spec{1.0, kAir, "east"};
  PipeSpec spec2{1.0, kAir, "west"};
  const int m = 30;
  Network net;
  net.scheme = JunctionScheme::MergedPair;
  net.pipes.push_back(uniform_pipe(spec, kSodRight, m, 1.0));
  net.pipes.push_back(uniform_pipe(spec2, mirror(kSodLeft), m, 1.0));

  TubeScenario merged;
  merged.gas = kAir;
  merged.left = kSodLeft;
  merged.right = kSodRight;
  merged.x_min = -1.0;
  merged.x_max = 1.0;
  merged.cells = 2 * m;
  TubeState tube = make_tube(merged);

  for (int step = 0; step < 25; ++step) {
    const double dt = std::min(cfl_dt(net, 0.9), tube_cfl_dt(tube, 0.9));
    advance_hyperbolic(net, dt);
    tube_advance(tube, dt);
  }
  for (int j = 0; j < m; ++j) {
    for (int c = 0; c < 3; ++c) {
      CHECK(net.pipes[0].cons[j][c] == tube.cons[m + j][c]);
      const double left = tube.cons[m - 1 - j][c];
      CHECK(net.pipes[1].cons[j][c] == (c == 1 ? -left : left));
    }
  }
}

TEST_CASE("contact-free collision converges at first order") {
  // Symmetric collision: two shocks and a zero-strength contact, so the
  // sub-linear contact smearing is absent and the scheme shows its full
  // first-order rate.
  const GasState l{1.0, 0.4, 1.0};
  const GasState r{1.0, -0.4, 1.0};
  auto l1_error = [&](int cells) {
    TubeScenario tube;
    tube.gas = kAir;
    tube.left = l;
    tube.right = r;
    tube.cells = cells;
    tube.end_time = 0.3;
    const TubeRun run = run_tube(tube);
    double err = 0.0;
    for (int j = 0; j < cells; ++j) {
      const GasState got = run.state.cell_state(j);
      const GasState want = oracle::exact_sample(
          l, r, kAir.gamma, run.state.cell_center(j) / 0.3);
      err += (std::abs(got.rho - want.rho) + std::abs(got.u - want.u) +
              std::abs(got.p - want.p)) *
             run.state.dx;
    }
    return err;
  };
  const double order = std::log2(l1_error(200) / l1_error(400));
  CHECK(order >= 0.8);
}

TEST_CASE("sod tube converges to the exact solution in L1") {
  auto l1_error = [&](int cells) {
    TubeScenario sod;
    sod.gas = kAir;
    sod.left = kSodLeft;
    sod.right = kSodRight;
    sod.cells = cells;
    sod.end_time = 0.2;
    const TubeRun run = run_tube(sod);
    double err = 0.0;
    for (int j = 0; j < cells; ++j) {
      const GasState got = run.state.cell_state(j);
      const GasState want = oracle::exact_sample(
          kSodLeft, kSodRight, kAir.gamma, run.state.cell_center(j) / 0.2);
      err += (std::abs(got.rho - want.rho) + std::abs(got.u - want.u) +
              std::abs(got.p - want.p)) *
             run.state.dx;
    }
    return err;
  };
  const double coarse = l1_error(100);
  const double fine = l1_error(200);
  CHECK(fine < coarse);
  CHECK(coarse < 0.2);
}

TEST_CASE("run_scenario: stationary diagnostics stay constant") {
  std::mt19937_64 rng(181);
  const JunctionProblem problem = make_stationary_problem(rng, 3, 1, false);
  Scenario scenario;
  scenario.network = network_from_problem(problem, 8, 1.0);
  scenario.end_time = 0.05;
  scenario.cfl = 0.9;
  scenario.output.sample_interval = 0.01;

  const RunResult result = run_scenario(scenario);
  REQUIRE(result.completed);
  REQUIRE(result.samples.size() >= 5);
  const DiagnosticsRecord& first = result.samples.front();
  for (const DiagnosticsRecord& rec : result.samples) {
    CHECK(rec.total_mass == first.total_mass);
    CHECK(rec.total_energy == first.total_energy);
    CHECK(rec.total_entropy == first.total_entropy);
    CHECK(rec.junction_mass_flux == first.junction_mass_flux);
    CHECK(rec.max_mach == first.max_mach);
  }
  CHECK(result.max_entropy_violation_rel <= 1e-10);
  // The sample times are hit exactly.
  CHECK(result.samples[1].time == 0.01);
  CHECK(result.samples.back().time == 0.05);
}

TEST_CASE("run_scenario is deterministic") {
  std::mt19937_64 rng(191);
  JunctionProblem problem = make_stationary_problem(rng, 3, 1, false);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (GasState& trace : problem.traces) trace.p *= 1.0 + 1e-3 * unit(rng);
  Scenario scenario;
  scenario.network = network_from_problem(problem, 12, 1.0);
  scenario.end_time = 0.03;
  scenario.output.sample_interval = 0.01;

  const RunResult a = run_scenario(scenario);
  const RunResult b = run_scenario(scenario);
  REQUIRE(a.completed);
  REQUIRE(b.completed);
  CHECK(a.steps == b.steps);
  CHECK(networks_equal(a.network, b.network));
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].total_mass == b.samples[i].total_mass);
    CHECK(a.samples[i].total_entropy == b.samples[i].total_entropy);
  }
}

TEST_CASE("run_scenario captures solver failures with context") {
  // Declared-outgoing pipe against a much stronger incoming pipe: the
  // junction reverses at the first step.
  Scenario scenario;
  scenario.network.scheme = JunctionScheme::EntropyMix;
  scenario.network.pipes.push_back(
      uniform_pipe({1.0, kAir, "weak"}, {1.0, 0.01, 3.0}, 8, 1.0));
  scenario.network.pipes.push_back(
      uniform_pipe({1.0, kAir, "strong"}, {1.0, -0.01, 1.0}, 8, 1.0));
  scenario.end_time = 0.1;

  const RunResult result = run_scenario(scenario);
  CHECK_FALSE(result.completed);
  CHECK(result.error_kind == "flow_reversal");
  CHECK(result.error_message.find("step") != std::string::npos);
}

TEST_CASE("zero-velocity trace uses the stored class") {
  Network net;
  net.scheme = JunctionScheme::PressureEqual;
  net.pipes.push_back(uniform_pipe({1.0, kAir, "a"}, {1.0, 0.0, 1.0}, 4, 1.0));
  net.pipes.push_back(uniform_pipe({1.0, kAir, "b"}, {1.0, 0.0, 1.0}, 4, 1.0));
  CHECK_THROWS_AS(junction_boundary_flux(net), ClassificationError);
  net.pipes[0].junction_class = FlowClass::Outgoing;
  net.pipes[1].junction_class = FlowClass::Incoming;
  const JunctionFluxes fluxes = junction_boundary_flux(net);
  CHECK(fluxes.flux[0][0] == 0.0);  // no flow through the resting junction
  CHECK(fluxes.flux[1][0] == 0.0);
}

TEST_CASE("splitting self-convergence on a uniform friction network") {
  // Spatially uniform mirrored pair under pure friction: the hyperbolic
  // substep is exactly trivial, so the measured order is the splitting and
  // source-integrator order, not masked by the first-order flux scheme.
  const GasState flow{1.15, 0.42, 1.3};
  const SourceModel model{0.0, 0.6, 0.5};

  auto final_state = [&](double dt, Splitting splitting) {
    Network net;
    net.scheme = JunctionScheme::MergedPair;
    net.pipes.push_back(uniform_pipe({1.0, kAir, "east"}, flow, 4, 1.0));
    net.pipes.push_back(uniform_pipe({1.0, kAir, "west"}, mirror(flow), 4, 1.0));
    const double t_end = 0.08;
    const int steps = static_cast<int>(std::round(t_end / dt));
    for (int s = 0; s < steps; ++s) advance_step(net, dt, model, splitting);
    return net;
  };
  auto diff = [&](const Network& a, const Network& b) {
    double d = 0.0;
    for (size_t i = 0; i < a.pipes.size(); ++i) {
      for (int c = 0; c < 3; ++c) {
        d = std::max(d, std::abs(a.pipes[i].cons[0][c] - b.pipes[i].cons[0][c]));
      }
    }
    return d;
  };
  for (Splitting splitting : {Splitting::Lie, Splitting::Strang}) {
    const Network f1 = final_state(4e-3, splitting);
    const Network f2 = final_state(2e-3, splitting);
    const Network f4 = final_state(1e-3, splitting);
    const double e1 = diff(f1, f2);
    const double e2 = diff(f2, f4);
    const double order = std::log2(e1 / e2);
    CHECK(order >= 0.8);
    if (splitting == Splitting::Strang) CHECK(order >= 1.8);
  }
}
