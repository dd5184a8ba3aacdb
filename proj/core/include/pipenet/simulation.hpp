#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pipenet/gas.hpp"
#include "pipenet/junction.hpp"
#include "pipenet/riemann.hpp"

namespace pipenet {

enum class FarEndBC { Outflow, Reflective };

/// Junction treatment used by the simulator. The coupled schemes solve the
/// generalised Riemann problem each step; MergedPair (two pipes of the same
/// gas and cross-section) computes the interface flux from the standard
/// Riemann problem across the junction, which handles zero-velocity traces.
enum class JunctionScheme {
  EntropyMix,
  PressureEqual,
  DynamicPressureEqual,
  MergedPair
};

enum class Splitting { Lie, Strang };

/// One piece of piecewise-constant initial data, [x_from, x_to).
struct InitialSegment {
  double x_from = 0.0;
  double x_to = 0.0;
  GasState state;
};

/// Uniform finite-volume grid of one pipe; x = 0 is the junction end.
/// Cell states are stored conservatively so that a vanishing flux balance
/// leaves them bit-for-bit unchanged.
struct GridPipe {
  PipeSpec spec;
  double length = 1.0;
  int cells = 200;
  FarEndBC far_end = FarEndBC::Outflow;
  std::vector<Vec3> cons;
  /// The initial data as declared in the scenario file; empty for grids
  /// assembled programmatically. Kept so the config echo is lossless.
  std::vector<InitialSegment> initial_spec;
  /// Flow class at the junction from the previous step (or the scenario),
  /// used as a fallback when the trace velocity is exactly zero.
  std::optional<FlowClass> junction_class;

  double dx() const { return length / cells; }
  double cell_center(int i) const { return (i + 0.5) * dx(); }
  GasState cell_state(int i) const;
};

struct Network {
  std::vector<GridPipe> pipes;
  JunctionScheme scheme = JunctionScheme::EntropyMix;
};

/// Local source model G = (0, -rho g - lambda_f rho u |u| / (2 D), -rho g u).
/// The energy component carries only gravity work; friction converts
/// mechanical into internal energy within the total energy.
struct SourceModel {
  double gravity = 0.0;          ///< acceleration along the pipe axis
  double friction_factor = 0.0;  ///< lambda_f >= 0
  double diameter = 1.0;         ///< > 0 when friction is active

  bool active() const { return gravity != 0.0 || friction_factor != 0.0; }
};

struct Probe {
  std::string pipe_label;
  double x = 0.0;
  int pipe = 0;  ///< resolved pipe index
  int cell = 0;  ///< resolved cell index
};

struct OutputPlan {
  std::string directory = "out";
  double sample_interval = 0.0;  ///< 0 -> only initial and final samples
  std::vector<Probe> probes;
};

struct Scenario {
  Network network;
  double end_time = 0.0;
  double cfl = 0.9;
  Splitting splitting = Splitting::Lie;
  SourceModel source;
  OutputPlan output;
};

struct DiagnosticsRecord {
  double time = 0.0;
  double total_mass = 0.0;
  double total_energy = 0.0;
  double total_entropy = 0.0;
  double junction_mass_flux = 0.0;
  double junction_energy_flux = 0.0;
  double junction_entropy_flux = 0.0;
  double max_mach = 0.0;
  std::vector<double> tv_per_pipe;
};

/// Godunov flux across one cell interface: the physical flux of the
/// self-similar Riemann solution at x/t = 0, plus the sampled state itself
/// (whose q s is the entropy flux through the interface).
struct InterfaceSolve {
  Vec3 flux{};
  GasState state;
};

InterfaceSolve godunov_interface(const GasState& left, const GasState& right,
                                 const GasParams& params);
Vec3 godunov_interface_flux(const GasState& left, const GasState& right,
                            const GasParams& params);

/// Per-pipe fluxes through the junction faces. Classifies the traces
/// (falling back to the stored class at zero velocity), solves the coupled
/// problem or the merged-pair Riemann problem, and records the balance sums.
struct JunctionFluxes {
  std::vector<Vec3> flux;
  std::vector<double> entropy_flux;
  std::optional<StarSolution> solution;  // absent for MergedPair
  JunctionBalance balance;
  int iterations = 0;
};

JunctionFluxes junction_boundary_flux(Network& network);

/// dt = cfl * min over cells of dx / max(|u - c|, |u + c|).
double cfl_dt(const Network& network, double cfl);

struct StepInfo {
  double dt = 0.0;
  std::vector<Vec3> junction_flux;
  std::vector<Vec3> far_end_flux;
  std::vector<double> junction_entropy_flux;
  std::vector<double> far_end_entropy_flux;
  std::optional<StarSolution> junction_solution;
  JunctionBalance junction_balance;
  int junction_iterations = 0;
};

/// One conservative Godunov step of the homogeneous system.
StepInfo advance_hyperbolic(Network& network, double dt);

/// One explicit second-order (Heun) step of the per-cell source ODE.
void advance_source(Network& network, double dt, const SourceModel& model);

/// Full split step: Lie applies the source after the hyperbolic step,
/// Strang applies source half-steps around it.
StepInfo advance_step(Network& network, double dt, const SourceModel& model,
                      Splitting splitting);

struct ConservationTotals {
  double mass = 0.0;
  double energy = 0.0;
  double entropy = 0.0;
};

ConservationTotals totals_of(const Network& network);

DiagnosticsRecord diagnostics_of(const Network& network, double time,
                                 const JunctionBalance& balance);

struct ProfileSnapshot {
  double time = 0.0;
  std::vector<std::vector<GasState>> per_pipe;
};

struct RunResult {
  std::vector<DiagnosticsRecord> samples;
  std::vector<ProfileSnapshot> snapshots;
  std::vector<std::vector<double>> probe_rows;  // time, then rho,u,p per probe
  Network network;  // final states, or the states at the failure
  long steps = 0;
  double time = 0.0;
  bool completed = false;
  std::string error_kind;     // empty on success
  std::string error_message;  // includes step/time context

  ConservationTotals initial_totals;
  ConservationTotals final_totals;
  /// Time-integrated flux sums over the junction faces (mass, energy,
  /// entropy-flux components).
  ConservationTotals junction_inflow;
  /// Time-integrated flux sums over the far-end faces.
  ConservationTotals far_end_outflow;

  /// Worst per-step boundary-accounted decrease of the total entropy,
  /// relative to the initial entropy scale (0 when monotone).
  double max_entropy_violation_rel = 0.0;
  double max_junction_mass_rel = 0.0;
  double max_junction_energy_rel = 0.0;
  double max_junction_entropy_rel = 0.0;
};

using StepCallback = std::function<void(const Network&, const StepInfo&)>;

/// Advance the scenario to end_time with per-step junction re-coupling,
/// CFL-limited steps clamped to the output sample times, and conservation
/// diagnostics. Solver failures are captured in the result together with the
/// partial outputs.
RunResult run_scenario(const Scenario& scenario,
                       const StepCallback& on_step = {});

/// Standard shock tube on a single merged domain with outflow ends.
struct TubeScenario {
  GasParams gas;
  GasState left;
  GasState right;
  double x_min = -1.0;
  double x_max = 1.0;
  double jump_x = 0.0;
  int cells = 400;
  double end_time = 0.2;
  double cfl = 0.9;
};

struct TubeState {
  double x_min = 0.0;
  double dx = 0.0;
  GasParams gas;
  std::vector<Vec3> cons;

  double cell_center(int i) const { return x_min + (i + 0.5) * dx; }
  GasState cell_state(int i) const;
};

TubeState make_tube(const TubeScenario& scenario);
double tube_cfl_dt(const TubeState& tube, double cfl);
void tube_advance(TubeState& tube, double dt);

struct TubeRun {
  TubeState state;
  long steps = 0;
  double time = 0.0;
  StarState star;  ///< star state of the initial jump
};

TubeRun run_tube(const TubeScenario& scenario);

}  // namespace pipenet
