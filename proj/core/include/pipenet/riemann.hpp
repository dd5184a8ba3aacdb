#pragma once

#include "pipenet/gas.hpp"

namespace pipenet {

/// Solved star region of a standard two-state Riemann problem. Pressure and
/// velocity are continuous across the middle contact; the density jumps.
struct StarState {
  double p_star = 0.0;
  double u_star = 0.0;
  double rho_left_star = 0.0;
  double rho_right_star = 0.0;
};

enum class WaveType { Shock, Rarefaction, Contact };

/// One elementary wave of a Riemann fan. Shocks and the contact carry a
/// single speed (head == tail); rarefactions carry head/tail fan speeds.
struct Wave {
  WaveType type = WaveType::Contact;
  double head = 0.0;  ///< leftmost characteristic speed of the wave
  double tail = 0.0;  ///< rightmost characteristic speed of the wave
};

/// Complete self-similar solution structure of a Riemann problem.
struct WaveFan {
  GasState left;
  GasState right;
  StarState star;
  Wave wave1, wave2, wave3;
};

/// Velocity change across a 1- or 3-wave as a function of the star pressure:
/// rarefaction branch for p_star <= p_k, shock branch for p_star > p_k.
/// Twice continuously differentiable at p_star == p_k.
double psi(double p_star, const GasState& state, const GasParams& params);

/// Density behind a 1- or 3-wave as a function of the star pressure.
double phi(double p_star, const GasState& state, const GasParams& params);

/// Analytic pressure derivatives of psi/phi on the branch selected by
/// p_star <=> p_k; both branches agree in value and first derivative at
/// the branch point.
double psi_dp(double p_star, const GasState& state, const GasParams& params);
double phi_dp(double p_star, const GasState& state, const GasParams& params);

/// Exact star state of the Riemann problem with data (left, right).
/// Throws VacuumError when the non-vacuum condition fails and
/// NoConvergenceError if the guarded Newton iteration cannot reach the
/// velocity-residual tolerance (1e-12 relative).
StarState solve_star(const GasState& left, const GasState& right,
                     const GasParams& params);

/// State on the 1-Lax curve through `left` at pressure sigma:
/// (phi(sigma), u_L - psi(sigma), sigma).
GasState lax1(double sigma, const GasState& left, const GasParams& params);

/// State on the 3-Lax curve through `right` at pressure sigma:
/// (phi(sigma), u_R + psi(sigma), sigma).
GasState lax3(double sigma, const GasState& right, const GasParams& params);

/// State on the 2-Lax curve (contact) through `base`: density offset tau,
/// velocity and pressure unchanged.
GasState lax2(double tau, const GasState& base, const GasParams& params);

/// Wave structure (types and speeds) of the fan solved by solve_star.
WaveFan build_wave_fan(const GasState& left, const GasState& right,
                       const GasParams& params);

/// Self-similar solution value at x/t = xi. Piecewise constant outside
/// rarefaction fans, standard isentropic fan interior inside.
GasState sample_wave_fan(const WaveFan& fan, double xi, const GasParams& params);

}  // namespace pipenet
