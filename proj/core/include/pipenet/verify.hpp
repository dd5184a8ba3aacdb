#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pipenet/junction.hpp"

namespace pipenet {

/// Random strictly subsonic state with O(1) magnitudes.
GasState random_subsonic_state(std::mt19937_64& rng, const GasParams& params,
                               double mach_max = 0.8);

struct StationaryOptions {
  bool vary_gamma = false;
  /// Density draw range; a narrow range keeps the trace pressures close to
  /// each other, which the pressure-based coupling modes need.
  double rho_min = 0.5;
  double rho_max = 2.0;
  /// Incoming speeds as a fraction of the sonic bound.
  double theta_max = 0.4;
};

/// Constructs a junction problem whose constant traces satisfy the
/// entropy-mix coupling conditions exactly (to roundoff): common total
/// enthalpy, outgoing entropies equal to the incoming mix, and balanced
/// mass flux (the last outgoing velocity is found by bisection).
JunctionProblem make_stationary_problem(std::mt19937_64& rng, int n_pipes,
                                        int n_outgoing,
                                        const StationaryOptions& options);
JunctionProblem make_stationary_problem(std::mt19937_64& rng, int n_pipes,
                                        int n_outgoing, bool vary_gamma);

/// A random two-pipe problem with opposite cross-sections whose generalised
/// Riemann problem is equivalent to a standard one (retry-sampled so the
/// merged star state is subsonic with positive contact speed).
JunctionProblem make_mirrored_pair(std::mt19937_64& rng);

struct JacobianAudit {
  double max_abs_deviation = 0.0;  // analytic vs central finite differences
  bool signs_ok = false;           // base-point derivative sign pattern
  bool s_star_sign_ok = false;     // ds*/dsigma of the reference pipe <= 0
  double min_singular_value = 0.0;
  double max_singular_value = 0.0;
};

/// Compares the analytic Jacobian at the base point (trace pressures, 0)
/// against central finite differences of the residual with step `fd_step`.
/// `flip_dtau_h_sign` negates the d h/d tau entries of the analytic matrix
/// before the comparison; it exists so the audit itself can be validated.
JacobianAudit audit_jacobian(const CanonicalJunction& junction, double fd_step,
                             bool flip_dtau_h_sign = false);

struct PairEquivalence {
  double star_deviation = 0.0;  // junction stars vs standard Riemann stars
};

/// Solves one mirrored pair both ways and reports the worst componentwise
/// deviation between the junction star traces and the standard star states.
PairEquivalence two_pipe_equivalence_check(const JunctionProblem& pair);

/// Bundle of randomized verification sweeps behind the `verify` subcommand.
struct VerifyCheck {
  std::string name;
  bool passed = false;
  double worst = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_passed = false;
  int trials = 0;
};

VerifyReport run_verification(std::uint64_t seed, int trials);

}  // namespace pipenet
