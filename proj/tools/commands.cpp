#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "pipenet/scenario_io.hpp"
#include "pipenet/verify.hpp"

namespace pipenet::cli {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int report_error(const Error& e, std::ostream& err) {
  const std::string kind = error_kind(e);
  err << "error: " << kind << ": " << e.what() << "\n";
  return exit_code_for_error_kind(kind);
}

JunctionProblem junction_problem_of(const Scenario& scenario) {
  if (scenario.network.scheme == JunctionScheme::MergedPair) {
    throw ConfigError(
        "junction.mode: solve-junction needs a coupled mode, not merged_pair");
  }
  JunctionProblem problem;
  switch (scenario.network.scheme) {
    case JunctionScheme::PressureEqual:
      problem.mode = CouplingMode::PressureEqual;
      break;
    case JunctionScheme::DynamicPressureEqual:
      problem.mode = CouplingMode::DynamicPressureEqual;
      break;
    default:
      problem.mode = CouplingMode::EntropyMix;
      break;
  }
  for (const GridPipe& pipe : scenario.network.pipes) {
    if (pipe.initial_spec.size() != 1) {
      throw ConfigError("pipes: solve-junction requires constant per-pipe states");
    }
    const GasState trace = pipe.initial_spec.front().state;
    problem.pipes.push_back(pipe.spec);
    problem.traces.push_back(trace);
    if (trace.u != 0.0) {
      problem.classes.push_back(trace.u > 0.0 ? FlowClass::Outgoing
                                              : FlowClass::Incoming);
    } else if (pipe.junction_class) {
      problem.classes.push_back(*pipe.junction_class);
    } else {
      throw ClassificationError("pipe '" + pipe.spec.label +
                                "': zero velocity and no flow_class declared");
    }
  }
  return problem;
}

double conservation_drift(const RunResult& result) {
  const double mass_scale = std::max(std::abs(result.initial_totals.mass), 1e-300);
  const double energy_scale =
      std::max(std::abs(result.initial_totals.energy), 1e-300);
  return std::max(std::abs(result.junction_inflow.mass) / mass_scale,
                  std::abs(result.junction_inflow.energy) / energy_scale);
}

}  // namespace

int exit_code_for_error_kind(const std::string& kind) {
  if (kind == "config") return 1;
  if (kind == "no_convergence") return 2;
  if (kind == "flow_reversal") return 3;
  if (kind == "degenerate_inflow") return 4;
  if (kind == "supersonic_star") return 5;
  if (kind == "invalid_problem") return 6;
  if (kind == "classification") return 7;
  if (kind == "vacuum" || kind == "invalid_state") return 8;
  return 1;
}

int cmd_solve_junction(const std::string& config_path, std::ostream& out,
                       std::ostream& err) {
  try {
    const Scenario scenario = load_scenario(config_path);
    const JunctionProblem problem = junction_problem_of(scenario);
    const StarSolution solution = solve_junction(problem);

    out << "junction solve: " << problem.size() << " pipes, "
        << solution.iterations << " Newton iterations, scaled residual "
        << short_num(solution.residual_norm) << "\n";
    for (int i = 0; i < problem.size(); ++i) {
      const GasState& star = solution.star_states[i];
      const GasParams& gas = problem.pipes[i].gas;
      out << "  pipe " << problem.pipes[i].label << " ["
          << (problem.classes[i] == FlowClass::Outgoing ? "outgoing" : "incoming")
          << "]\n";
      out << "    sigma = " << num(solution.sigma[i])
          << "  tau = " << num(solution.tau[i]) << "\n";
      out << "    star: rho = " << num(star.rho) << "  u = " << num(star.u)
          << "  p = " << num(star.p) << "\n";
      out << "    star: s = " << num(entropy(star, gas))
          << "  h = " << num(enthalpy(star, gas)) << "\n";
    }
    out << "flux sums:"
        << "  mass = " << short_num(solution.balance.mass)
        << "  energy = " << short_num(solution.balance.energy)
        << "  entropy = " << short_num(solution.balance.entropy) << "\n";
    out << "relative:"
        << "  mass = " << short_num(solution.balance.mass_rel)
        << "  energy = " << short_num(solution.balance.energy_rel)
        << "  entropy = " << short_num(solution.balance.entropy_rel) << "\n";
    return 0;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 bool mode_compare, std::ostream& out, std::ostream& err) {
  try {
    const Scenario scenario = load_scenario(config_path);
    const std::string directory =
        out_dir.empty() ? scenario.output.directory : out_dir;

    const auto t0 = std::chrono::steady_clock::now();
    const RunResult result = run_scenario(scenario);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    write_output_bundle(directory, scenario, result, wall);

    if (mode_compare) {
      Scenario other = scenario;
      other.network.scheme =
          scenario.network.scheme == JunctionScheme::PressureEqual
              ? JunctionScheme::EntropyMix
              : JunctionScheme::PressureEqual;
      const char* other_name =
          other.network.scheme == JunctionScheme::PressureEqual
              ? "diagnostics_pressure.csv"
              : "diagnostics_entropy_mix.csv";
      const RunResult other_result = run_scenario(other);
      {
        std::ofstream os(std::filesystem::path(directory) / other_name);
        write_diagnostics_csv(os, other_result.samples);
      }
      out << "mode comparison: junction entropy flux (time-max magnitude) "
          << short_num(result.max_junction_entropy_rel) << " vs "
          << short_num(other_result.max_junction_entropy_rel) << " ("
          << other_name << ")\n";
      if (!other_result.completed) {
        err << "warning: comparison run stopped early: "
            << other_result.error_message << "\n";
      }
    }

    out << "simulate: steps = " << result.steps
        << ", final time = " << short_num(result.time)
        << ", max conservation drift = " << short_num(conservation_drift(result))
        << ", outputs in " << directory << "\n";
    if (!result.completed) {
      err << "error: " << result.error_kind << ": " << result.error_message
          << " (partial outputs flushed)\n";
      return exit_code_for_error_kind(result.error_kind);
    }
    return 0;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_shock_tube(const std::string& config_path, const std::string& out_dir,
                   std::ostream& out, std::ostream& err) {
  try {
    const Scenario scenario = load_scenario(config_path);
    if (scenario.network.pipes.size() != 2) {
      throw ConfigError("pipes: shock-tube requires exactly 2 pipes");
    }
    const GridPipe& right = scenario.network.pipes[0];
    const GridPipe& left = scenario.network.pipes[1];
    if (right.initial_spec.size() != 1 || left.initial_spec.size() != 1) {
      throw ConfigError("pipes: shock-tube requires constant per-pipe states");
    }
    if (right.spec.gas.gamma != left.spec.gas.gamma ||
        right.spec.gas.c_v != left.spec.gas.c_v) {
      throw ConfigError("pipes: shock-tube requires one gas model");
    }
    if (right.dx() != left.dx()) {
      throw ConfigError("pipes: shock-tube requires matching cell widths");
    }

    TubeScenario tube;
    tube.gas = right.spec.gas;
    tube.right = right.initial_spec.front().state;
    tube.left = mirror(left.initial_spec.front().state);
    tube.x_min = -left.length;
    tube.x_max = right.length;
    tube.jump_x = 0.0;
    tube.cells = left.cells + right.cells;
    tube.end_time = scenario.end_time;
    tube.cfl = scenario.cfl;

    const TubeRun run = run_tube(tube);
    out << "shock tube: " << run.steps << " steps to t = "
        << short_num(run.time) << "\n";
    out << "star state:\n";
    out << "    p = " << num(run.star.p_star) << "  u = " << num(run.star.u_star)
        << "\n";
    out << "    rho_left = " << num(run.star.rho_left_star)
        << "  rho_right = " << num(run.star.rho_right_star) << "\n";

    const std::string directory =
        out_dir.empty() ? scenario.output.directory : out_dir;
    std::filesystem::create_directories(directory);
    std::ofstream os(std::filesystem::path(directory) / "tube_profile.csv");
    os << "x,rho,u,p,s,h\n";
    for (size_t i = 0; i < run.state.cons.size(); ++i) {
      const GasState s = run.state.cell_state(static_cast<int>(i));
      os << num(run.state.cell_center(static_cast<int>(i))) << ',' << num(s.rho)
         << ',' << num(s.u) << ',' << num(s.p) << ','
         << num(entropy(s, tube.gas)) << ',' << num(enthalpy(s, tube.gas))
         << '\n';
    }
    out << "profile written to " << directory << "/tube_profile.csv\n";
    return 0;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_verify(std::uint64_t seed, int trials, std::ostream& out,
               std::ostream& err) {
  if (trials <= 0) {
    err << "warning: no trials requested, nothing verified\n";
    out << "verify: no trials\n";
    return 0;
  }
  try {
    const VerifyReport report = run_verification(seed, trials);
    for (const VerifyCheck& check : report.checks) {
      out << (check.passed ? "PASS" : "FAIL") << "  " << check.name << ": "
          << check.detail << "\n";
    }
    out << "verify: " << (report.all_passed ? "all checks passed" : "FAILURES")
        << " (seed " << seed << ", " << trials << " trials)\n";
    return report.all_passed ? 0 : 1;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

}  // namespace pipenet::cli
