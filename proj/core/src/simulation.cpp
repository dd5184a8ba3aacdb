#include "pipenet/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pipenet {

GasState GridPipe::cell_state(int i) const {
  return conservative_to_primitive(cons[i], spec.gas);
}

GasState TubeState::cell_state(int i) const {
  return conservative_to_primitive(cons[i], gas);
}

InterfaceSolve godunov_interface(const GasState& left, const GasState& right,
                                 const GasParams& params) {
  const WaveFan fan = build_wave_fan(left, right, params);
  InterfaceSolve solve;
  solve.state = sample_wave_fan(fan, 0.0, params);
  solve.flux = physical_flux(solve.state, params);
  return solve;
}

Vec3 godunov_interface_flux(const GasState& left, const GasState& right,
                            const GasParams& params) {
  return godunov_interface(left, right, params).flux;
}

namespace {

CouplingMode coupling_mode_of(JunctionScheme scheme) {
  switch (scheme) {
    case JunctionScheme::PressureEqual:
      return CouplingMode::PressureEqual;
    case JunctionScheme::DynamicPressureEqual:
      return CouplingMode::DynamicPressureEqual;
    default:
      return CouplingMode::EntropyMix;
  }
}

FlowClass classify_trace(const GasState& trace, const GridPipe& pipe) {
  if (trace.u != 0.0) {
    return classify_flow(trace, pipe.spec.gas);
  }
  if (pipe.junction_class) {
    return *pipe.junction_class;
  }
  std::ostringstream os;
  os << "pipe '" << pipe.spec.label
     << "': zero trace velocity at the junction and no previous flow class";
  throw ClassificationError(os.str());
}

JunctionBalance balance_from_fluxes(const Network& network,
                                    const std::vector<Vec3>& flux,
                                    const std::vector<double>& entropy_flux) {
  JunctionBalance b;
  double max_mass = 0.0, max_energy = 0.0, max_entropy = 0.0;
  for (size_t i = 0; i < network.pipes.size(); ++i) {
    const double nu = network.pipes[i].spec.nu_norm;
    b.mass += nu * flux[i][0];
    b.energy += nu * flux[i][2];
    b.entropy += nu * entropy_flux[i];
    max_mass = std::max(max_mass, std::abs(nu * flux[i][0]));
    max_energy = std::max(max_energy, std::abs(nu * flux[i][2]));
    max_entropy = std::max(max_entropy, std::abs(nu * entropy_flux[i]));
  }
  b.mass_rel = max_mass > 0.0 ? std::abs(b.mass) / max_mass : 0.0;
  b.energy_rel = max_energy > 0.0 ? std::abs(b.energy) / max_energy : 0.0;
  b.entropy_rel = max_entropy > 0.0 ? std::abs(b.entropy) / max_entropy : 0.0;
  return b;
}

}  // namespace

JunctionFluxes junction_boundary_flux(Network& network) {
  const size_t n = network.pipes.size();
  JunctionFluxes result;
  result.flux.resize(n);
  result.entropy_flux.resize(n);

  if (network.scheme == JunctionScheme::MergedPair) {
    if (n != 2) {
      throw InvalidProblemError("merged-pair junction requires exactly 2 pipes");
    }
    const GasParams& gas = network.pipes[0].spec.gas;
    const GasState right = network.pipes[0].cell_state(0);
    const GasState left = mirror(network.pipes[1].cell_state(0));
    const InterfaceSolve iface = godunov_interface(left, right, gas);
    const double qs =
        mass_flux(iface.state) * entropy(iface.state, gas);
    result.flux[0] = iface.flux;
    result.entropy_flux[0] = qs;
    result.flux[1] = mirror_flux(iface.flux);
    result.entropy_flux[1] = -qs;
    result.balance = balance_from_fluxes(network, result.flux, result.entropy_flux);
    return result;
  }

  JunctionProblem problem;
  problem.mode = coupling_mode_of(network.scheme);
  problem.pipes.reserve(n);
  problem.traces.reserve(n);
  problem.classes.reserve(n);
  for (GridPipe& pipe : network.pipes) {
    const GasState trace = pipe.cell_state(0);
    const FlowClass cls = classify_trace(trace, pipe);
    pipe.junction_class = cls;
    problem.pipes.push_back(pipe.spec);
    problem.traces.push_back(trace);
    problem.classes.push_back(cls);
  }

  StarSolution solution = solve_junction(problem);
  for (size_t i = 0; i < n; ++i) {
    const GasState& star = solution.star_states[i];
    const GasParams& gas = network.pipes[i].spec.gas;
    result.flux[i] = physical_flux(star, gas);
    result.entropy_flux[i] = mass_flux(star) * entropy(star, gas);
  }
  result.iterations = solution.iterations;
  result.balance = solution.balance;
  result.solution = std::move(solution);
  return result;
}

double cfl_dt(const Network& network, double cfl) {
  double dt = std::numeric_limits<double>::infinity();
  for (const GridPipe& pipe : network.pipes) {
    const double dx = pipe.dx();
    for (int i = 0; i < pipe.cells; ++i) {
      const GasState state = pipe.cell_state(i);
      const double c = sound_speed(state, pipe.spec.gas);
      const double speed = std::max(std::abs(state.u - c), std::abs(state.u + c));
      dt = std::min(dt, dx / speed);
    }
  }
  return cfl * dt;
}

StepInfo advance_hyperbolic(Network& network, double dt) {
  const size_t n = network.pipes.size();
  StepInfo info;
  info.dt = dt;

  JunctionFluxes junction = junction_boundary_flux(network);
  info.junction_flux = junction.flux;
  info.junction_entropy_flux = junction.entropy_flux;
  info.junction_solution = std::move(junction.solution);
  info.junction_balance = junction.balance;
  info.junction_iterations = junction.iterations;
  info.far_end_flux.resize(n);
  info.far_end_entropy_flux.resize(n);

  for (size_t pi = 0; pi < n; ++pi) {
    GridPipe& pipe = network.pipes[pi];
    const GasParams& gas = pipe.spec.gas;
    const int m = pipe.cells;

    std::vector<Vec3> face_flux(static_cast<size_t>(m) + 1);
    face_flux[0] = info.junction_flux[pi];
    for (int j = 1; j < m; ++j) {
      face_flux[j] =
          godunov_interface_flux(pipe.cell_state(j - 1), pipe.cell_state(j), gas);
    }
    const GasState last = pipe.cell_state(m - 1);
    const GasState ghost =
        pipe.far_end == FarEndBC::Outflow ? last : mirror(last);
    const InterfaceSolve far = godunov_interface(last, ghost, gas);
    face_flux[m] = far.flux;
    info.far_end_flux[pi] = far.flux;
    info.far_end_entropy_flux[pi] =
        mass_flux(far.state) * entropy(far.state, gas);

    const double k = dt / pipe.dx();
    for (int j = 0; j < m; ++j) {
      for (int c = 0; c < 3; ++c) {
        pipe.cons[j][c] -= k * (face_flux[j + 1][c] - face_flux[j][c]);
      }
    }
    for (int j = 0; j < m; ++j) {
      try {
        (void)pipe.cell_state(j);
      } catch (const InvalidStateError& e) {
        std::ostringstream os;
        os << "pipe '" << pipe.spec.label << "' cell " << j
           << " became invalid after the hyperbolic update: " << e.what();
        throw InvalidStateError(os.str());
      }
    }
  }
  return info;
}

void advance_source(Network& network, double dt, const SourceModel& model) {
  if (!model.active()) return;
  const double g = model.gravity;
  const double friction =
      model.friction_factor > 0.0 ? model.friction_factor / (2.0 * model.diameter)
                                  : 0.0;

  for (GridPipe& pipe : network.pipes) {
    for (int j = 0; j < pipe.cells; ++j) {
      Vec3& u = pipe.cons[j];
      const double rho = u[0];  // G1 = 0, density is frozen
      auto rate = [&](double q) {
        const double dq = -rho * g - friction * q * std::abs(q) / rho;
        const double de = -g * q;
        return std::array<double, 2>{dq, de};
      };
      const auto k1 = rate(u[1]);
      const auto k2 = rate(u[1] + dt * k1[0]);
      u[1] += 0.5 * dt * (k1[0] + k2[0]);
      u[2] += 0.5 * dt * (k1[1] + k2[1]);
      try {
        (void)pipe.cell_state(j);
      } catch (const InvalidStateError& e) {
        std::ostringstream os;
        os << "pipe '" << pipe.spec.label << "' cell " << j
           << " became invalid after the source update: " << e.what();
        throw InvalidStateError(os.str());
      }
    }
  }
}

StepInfo advance_step(Network& network, double dt, const SourceModel& model,
                      Splitting splitting) {
  if (splitting == Splitting::Strang && model.active()) {
    advance_source(network, 0.5 * dt, model);
    StepInfo info = advance_hyperbolic(network, dt);
    advance_source(network, 0.5 * dt, model);
    return info;
  }
  StepInfo info = advance_hyperbolic(network, dt);
  if (model.active()) {
    advance_source(network, dt, model);
  }
  return info;
}

ConservationTotals totals_of(const Network& network) {
  ConservationTotals t;
  for (const GridPipe& pipe : network.pipes) {
    const double w = pipe.spec.nu_norm * pipe.dx();
    for (int j = 0; j < pipe.cells; ++j) {
      t.mass += w * pipe.cons[j][0];
      t.energy += w * pipe.cons[j][2];
      t.entropy +=
          w * pipe.cons[j][0] * entropy(pipe.cell_state(j), pipe.spec.gas);
    }
  }
  return t;
}

DiagnosticsRecord diagnostics_of(const Network& network, double time,
                                 const JunctionBalance& balance) {
  DiagnosticsRecord rec;
  rec.time = time;
  const ConservationTotals totals = totals_of(network);
  rec.total_mass = totals.mass;
  rec.total_energy = totals.energy;
  rec.total_entropy = totals.entropy;
  rec.junction_mass_flux = balance.mass;
  rec.junction_energy_flux = balance.energy;
  rec.junction_entropy_flux = balance.entropy;

  for (const GridPipe& pipe : network.pipes) {
    double tv = 0.0;
    GasState prev = pipe.cell_state(0);
    rec.max_mach = std::max(
        rec.max_mach, std::abs(prev.u) / sound_speed(prev, pipe.spec.gas));
    for (int j = 1; j < pipe.cells; ++j) {
      const GasState cur = pipe.cell_state(j);
      tv += std::abs(cur.rho - prev.rho) + std::abs(cur.u - prev.u) +
            std::abs(cur.p - prev.p);
      rec.max_mach = std::max(
          rec.max_mach, std::abs(cur.u) / sound_speed(cur, pipe.spec.gas));
      prev = cur;
    }
    rec.tv_per_pipe.push_back(tv);
  }
  return rec;
}

namespace {

std::vector<GasState> probe_state_row(const Network& network,
                                      const std::vector<Probe>& probes) {
  std::vector<GasState> states;
  states.reserve(probes.size());
  for (const Probe& probe : probes) {
    states.push_back(network.pipes[probe.pipe].cell_state(probe.cell));
  }
  return states;
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const StepCallback& on_step) {
  RunResult result;
  result.network = scenario.network;
  Network& net = result.network;

  // Entropy scale for the monotonicity audit, fixed from the initial data.
  double entropy_scale = 0.0;
  for (const GridPipe& pipe : net.pipes) {
    const double w = pipe.spec.nu_norm * pipe.dx();
    for (int j = 0; j < pipe.cells; ++j) {
      const GasState s = pipe.cell_state(j);
      entropy_scale +=
          w * s.rho *
          (std::abs(entropy(s, pipe.spec.gas)) + pipe.spec.gas.gamma * pipe.spec.gas.c_v);
    }
  }

  result.initial_totals = totals_of(net);

  auto emit_sample = [&](double time, const JunctionBalance& balance) {
    result.samples.push_back(diagnostics_of(net, time, balance));
    ProfileSnapshot snap;
    snap.time = time;
    for (const GridPipe& pipe : net.pipes) {
      std::vector<GasState> states;
      states.reserve(pipe.cells);
      for (int j = 0; j < pipe.cells; ++j) states.push_back(pipe.cell_state(j));
      snap.per_pipe.push_back(std::move(states));
    }
    result.snapshots.push_back(std::move(snap));
    if (!scenario.output.probes.empty()) {
      std::vector<double> row{time};
      for (const GasState& s : probe_state_row(net, scenario.output.probes)) {
        row.push_back(s.rho);
        row.push_back(s.u);
        row.push_back(s.p);
      }
      result.probe_rows.push_back(std::move(row));
    }
  };

  double t = 0.0;
  long step = 0;
  try {
    // Initial sample; also seeds the junction classification.
    const JunctionFluxes initial_fluxes = junction_boundary_flux(net);
    emit_sample(0.0, initial_fluxes.balance);

    const double interval = scenario.output.sample_interval;
    int next_sample = 1;
    while (t < scenario.end_time) {
      double target = scenario.end_time;
      if (interval > 0.0) {
        target = std::min(target, next_sample * interval);
      }
      const double dt_cfl = cfl_dt(net, scenario.cfl);
      const bool clamped = target - t <= dt_cfl;
      const double dt = clamped ? target - t : dt_cfl;

      const ConservationTotals before = totals_of(net);
      const StepInfo info =
          advance_step(net, dt, scenario.source, scenario.splitting);
      ++step;
      t = clamped ? target : t + dt;

      double junc_mass = 0.0, junc_energy = 0.0, junc_entropy = 0.0;
      double far_mass = 0.0, far_energy = 0.0, far_entropy = 0.0;
      for (size_t i = 0; i < net.pipes.size(); ++i) {
        const double nu = net.pipes[i].spec.nu_norm;
        junc_mass += nu * info.junction_flux[i][0];
        junc_energy += nu * info.junction_flux[i][2];
        junc_entropy += nu * info.junction_entropy_flux[i];
        far_mass += nu * info.far_end_flux[i][0];
        far_energy += nu * info.far_end_flux[i][2];
        far_entropy += nu * info.far_end_entropy_flux[i];
      }
      result.junction_inflow.mass += dt * junc_mass;
      result.junction_inflow.energy += dt * junc_energy;
      result.junction_inflow.entropy += dt * junc_entropy;
      result.far_end_outflow.mass += dt * far_mass;
      result.far_end_outflow.energy += dt * far_energy;
      result.far_end_outflow.entropy += dt * far_entropy;

      if (!scenario.source.active()) {
        const ConservationTotals after = totals_of(net);
        const double expected_gain = dt * (junc_entropy - far_entropy);
        const double violation = expected_gain - (after.entropy - before.entropy);
        if (entropy_scale > 0.0) {
          result.max_entropy_violation_rel = std::max(
              result.max_entropy_violation_rel, violation / entropy_scale);
        }
      }
      result.max_junction_mass_rel =
          std::max(result.max_junction_mass_rel, info.junction_balance.mass_rel);
      result.max_junction_energy_rel = std::max(result.max_junction_energy_rel,
                                                info.junction_balance.energy_rel);
      result.max_junction_entropy_rel = std::max(
          result.max_junction_entropy_rel, info.junction_balance.entropy_rel);

      if (clamped) {
        if (interval > 0.0 && target < scenario.end_time) {
          emit_sample(t, info.junction_balance);
          ++next_sample;
        } else if (target == scenario.end_time) {
          if (interval > 0.0 && std::abs(next_sample * interval - t) == 0.0) {
            ++next_sample;
          }
          emit_sample(t, info.junction_balance);
        }
      }
      if (on_step) on_step(net, info);
    }
    result.completed = true;
  } catch (const Error& e) {
    std::ostringstream os;
    os << "step " << step + 1 << ", t=" << t << ": " << e.what();
    result.error_kind = error_kind(e);
    result.error_message = os.str();
  }
  result.steps = step;
  result.time = t;
  result.final_totals = totals_of(net);
  return result;
}

TubeState make_tube(const TubeScenario& scenario) {
  if (scenario.cells < 2) {
    throw InvalidProblemError("tube needs at least 2 cells");
  }
  if (!(scenario.x_max > scenario.x_min)) {
    throw InvalidProblemError("tube needs x_max > x_min");
  }
  TubeState tube;
  tube.x_min = scenario.x_min;
  tube.dx = (scenario.x_max - scenario.x_min) / scenario.cells;
  tube.gas = scenario.gas;
  tube.cons.reserve(scenario.cells);
  for (int i = 0; i < scenario.cells; ++i) {
    const GasState& s =
        tube.cell_center(i) < scenario.jump_x ? scenario.left : scenario.right;
    tube.cons.push_back(primitive_to_conservative(s, scenario.gas));
  }
  return tube;
}

double tube_cfl_dt(const TubeState& tube, double cfl) {
  double dt = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < tube.cons.size(); ++i) {
    const GasState state = tube.cell_state(static_cast<int>(i));
    const double c = sound_speed(state, tube.gas);
    const double speed = std::max(std::abs(state.u - c), std::abs(state.u + c));
    dt = std::min(dt, tube.dx / speed);
  }
  return cfl * dt;
}

void tube_advance(TubeState& tube, double dt) {
  const int m = static_cast<int>(tube.cons.size());
  std::vector<Vec3> face_flux(static_cast<size_t>(m) + 1);
  face_flux[0] = physical_flux(tube.cell_state(0), tube.gas);
  for (int j = 1; j < m; ++j) {
    face_flux[j] =
        godunov_interface_flux(tube.cell_state(j - 1), tube.cell_state(j), tube.gas);
  }
  face_flux[m] = physical_flux(tube.cell_state(m - 1), tube.gas);

  const double k = dt / tube.dx;
  for (int j = 0; j < m; ++j) {
    for (int c = 0; c < 3; ++c) {
      tube.cons[j][c] -= k * (face_flux[j + 1][c] - face_flux[j][c]);
    }
  }
}

TubeRun run_tube(const TubeScenario& scenario) {
  TubeRun run;
  run.state = make_tube(scenario);
  run.star = solve_star(scenario.left, scenario.right, scenario.gas);
  while (run.time < scenario.end_time) {
    const double dt =
        std::min(tube_cfl_dt(run.state, scenario.cfl), scenario.end_time - run.time);
    tube_advance(run.state, dt);
    run.time = run.time + dt >= scenario.end_time ? scenario.end_time : run.time + dt;
    ++run.steps;
  }
  return run;
}

}  // namespace pipenet
