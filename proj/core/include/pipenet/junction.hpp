#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pipenet/gas.hpp"
#include "pipenet/matrix.hpp"
#include "pipenet/riemann.hpp"

namespace pipenet {

/// Algebraic conditions imposed on the pipe traces at the junction.
///  - EntropyMix: mass balance, enthalpy equality, and outgoing entropies
///    equal to the mass-flux-weighted mix of the incoming entropies.
///    Conserves mass, energy and entropy flux; any 0 < N_o < N.
///  - PressureEqual: mass balance, energy balance, equal trace pressures.
///    Requires exactly one outgoing pipe.
///  - DynamicPressureEqual: as PressureEqual with rho u^2 + p equalised.
enum class CouplingMode { EntropyMix, PressureEqual, DynamicPressureEqual };

/// Generalised Riemann problem at a junction of N pipes: constant subsonic
/// traces, a declared flow-direction split, and a coupling mode.
struct JunctionProblem {
  std::vector<PipeSpec> pipes;
  std::vector<GasState> traces;
  std::vector<FlowClass> classes;
  CouplingMode mode = CouplingMode::EntropyMix;

  int size() const { return static_cast<int>(pipes.size()); }
  int n_outgoing() const;
};

/// Throws InvalidProblemError / InvalidStateError / ClassificationError when
/// the problem violates its invariants (sizes, validity, strict subsonicity,
/// 0 < N_o < N, pressure modes with N_o != 1).
void validate_problem(const JunctionProblem& problem);

/// A junction problem reordered into the canonical numbering: outgoing pipes
/// first (1..N_o), incoming pipes after, with the incoming pipe of maximal
/// entropy placed first among them. All residual/Jacobian layouts below refer
/// to this ordering.
struct CanonicalJunction {
  JunctionProblem problem;       // reordered
  std::vector<int> to_user;      // canonical index -> index in the user problem
  int n_out = 0;

  int size() const { return problem.size(); }
  /// Dimension of the unknown vector (sigma_1..N, tau_1..N_o).
  int dim() const { return size() + n_out; }
};

CanonicalJunction canonicalize(const JunctionProblem& problem);

/// Lax-curve degrees of freedom in canonical order: one star pressure per
/// pipe and one contact density offset per outgoing pipe.
struct CouplingParams {
  std::vector<double> sigma;  // size N
  std::vector<double> tau;    // size N_o
};

CouplingParams initial_params(const CanonicalJunction& junction);

/// (q, h, s) of the curve state L3(sigma, base), or L2(tau, L3(sigma, base))
/// when tau is present (outgoing pipes).
struct StarTrace {
  double q = 0.0;
  double h = 0.0;
  double s = 0.0;
};

StarTrace star_trace_quantities(double sigma, std::optional<double> tau,
                                const GasState& base, const GasParams& params);

/// Mass-flux-weighted entropy mix over the incoming pipes, evaluated at the
/// given canonical sigma vector. Throws DegenerateInflowError when the net
/// incoming mass flux is numerically zero.
double entropy_mix(const CanonicalJunction& junction,
                   std::span<const double> sigma);

/// Coupling residual in canonical row order. EntropyMix:
///   row 0:            sum_i |nu_i| q_i
///   rows 1..N-1:      h_{N_o+1} - h_k  (outgoing k first, then incoming)
///   rows N..N+N_o-1:  s_i - s*         (outgoing i)
/// Pressure modes (N_o = 1): mass row, energy-flux row, then N-1 rows of
/// (dynamic) pressure equality against pipe 1.
std::vector<double> coupling_residual(const CanonicalJunction& junction,
                                      const CouplingParams& params);

/// Analytic Jacobian of coupling_residual with respect to
/// (sigma_1..sigma_N, tau_1..tau_N_o), valid at any admissible point.
Mat coupling_jacobian(const CanonicalJunction& junction,
                      const CouplingParams& params);

/// Per-row magnitudes used to nondimensionalise the residual.
std::vector<double> residual_scales(const CanonicalJunction& junction);

/// max_r |residual_r| / scale_r.
double scaled_residual_norm(const CanonicalJunction& junction,
                            std::span<const double> residual);

/// Signed flux sums at the junction and their values relative to the largest
/// single-pipe contribution.
struct JunctionBalance {
  double mass = 0.0;
  double energy = 0.0;
  double entropy = 0.0;
  double mass_rel = 0.0;
  double energy_rel = 0.0;
  double entropy_rel = 0.0;
};

struct SolveOptions {
  double tolerance = 1e-11;  ///< acceptance on the scaled residual norm
  int max_iterations = 50;
  int max_backtracks = 40;
  std::optional<CouplingParams> initial_guess;  // canonical order
};

/// Solved generalised Riemann problem. All per-pipe vectors are in the order
/// of the pipes in the user-supplied problem; tau entries of incoming pipes
/// are zero.
struct StarSolution {
  std::vector<double> sigma;
  std::vector<double> tau;
  std::vector<GasState> star_states;
  double residual_norm = 0.0;  // scaled max-norm at the returned parameters
  int iterations = 0;
  JunctionBalance balance;
};

/// Damped Newton solve of the coupling conditions from (trace pressures, 0).
/// Dispatches on problem.mode. Throws NoConvergenceError,
/// SupersonicStateError, FlowReversalError, or DegenerateInflowError.
StarSolution solve_junction(const JunctionProblem& problem,
                            const SolveOptions& options = {});

/// Flux sums sum |nu| q*, sum |nu| (q h)*, sum |nu| (q s)* of a solution.
JunctionBalance verify_conservation(const StarSolution& solution,
                                    const JunctionProblem& problem);

/// Base-point derivative values (sigma = trace pressures, tau = 0) in
/// canonical order, the entries of the coupling Jacobian there.
struct BasePointDerivatives {
  std::vector<double> q_hat_sigma;  // |nu_i| dq_i/dsigma_i, all pipes
  std::vector<double> h_sigma;      // dh_i/dsigma_i, all pipes
  std::vector<double> q_hat_tau;    // |nu_i| dq_i/dtau_i, outgoing pipes
  std::vector<double> h_tau;        // dh_i/dtau_i, outgoing pipes
  std::vector<double> s_tau;        // ds_i/dtau_i, outgoing pipes
  std::vector<double> s_star_sigma; // ds*/dsigma_j, incoming pipes
};

BasePointDerivatives base_point_derivatives(const CanonicalJunction& junction);

/// The 3x3 blocks whose regularity decides the regularity of the full
/// base-point Jacobian in EntropyMix mode, one per outgoing pipe, and their
/// determinants (all strictly negative for admissible data).
struct CouplingBlocks {
  std::vector<Mat> d_matrices;
  std::vector<double> determinants;
};

CouplingBlocks coupling_d_matrices(const CanonicalJunction& junction);

/// Empirical Lipschitz statistics of the junction solution map.
enum class PerturbationKind { Traces, CrossSections };

struct LipschitzStats {
  int trials = 0;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
};

/// For `trials` random perturbations of magnitude <= delta (relative), the
/// ratio  max-norm of the star-state change / conservative-norm of the data
/// change. Returns empty statistics when trials == 0 or delta == 0.
LipschitzStats lipschitz_probe(const JunctionProblem& problem, double delta,
                               int trials, std::uint64_t seed,
                               PerturbationKind kind);

}  // namespace pipenet
