#pragma once

#include <array>
#include <string>

#include "pipenet/errors.hpp"

namespace pipenet {

/// Conservative triple (rho, q, E) or a flux triple, depending on context.
using Vec3 = std::array<double, 3>;

/// Parameters of an ideal polytropic gas.
struct GasParams {
  double gamma = 1.4;  ///< adiabatic exponent, > 1
  double c_v = 1.0;    ///< specific heat capacity, > 0

  /// (gamma - 1)/(gamma + 1), the shock-branch constant.
  double mu_sq() const { return (gamma - 1.0) / (gamma + 1.0); }
};

/// Primitive thermodynamic state of one cell: density, velocity, pressure.
struct GasState {
  double rho = 1.0;
  double u = 0.0;
  double p = 1.0;
};

/// Direction of flow relative to the junction a pipe originates from.
/// Outgoing corresponds to u > 0 (away from the junction), Incoming to u < 0.
enum class FlowClass { Incoming, Outgoing };

/// Pipe geometry and gas model. Only the norm of the cross-section vector
/// enters any equation; the direction is bookkeeping.
struct PipeSpec {
  double nu_norm = 1.0;  ///< cross-section measure, > 0
  GasParams gas;
  std::string label;
};

bool is_valid(const GasParams& params);
bool is_valid(const GasState& state);

/// Throws InvalidStateError if the state or parameters are out of domain.
void require_valid(const GasState& state, const GasParams& params,
                   const char* context);

double mass_flux(const GasState& state);                            // q
double total_energy(const GasState& state, const GasParams& p);    // E
double sound_speed(const GasState& state, const GasParams& p);     // c
double entropy(const GasState& state, const GasParams& p);         // s
double enthalpy(const GasState& state, const GasParams& p);        // h

/// (rho, q, E) from a primitive state.
Vec3 primitive_to_conservative(const GasState& state, const GasParams& p);

/// Exact algebraic inverse of primitive_to_conservative. Throws
/// InvalidStateError if rho <= 0 or the recovered pressure is nonpositive
/// (vacuum or invalid cell).
GasState conservative_to_primitive(const Vec3& cons, const GasParams& p);

/// (u - c, u, u + c).
std::array<double, 3> eigenvalues(const GasState& state, const GasParams& p);

/// (rho u, rho u^2 + p, u (E + p)).
Vec3 physical_flux(const GasState& state, const GasParams& p);

/// Flow-direction classification for strictly subsonic states with
/// nonzero velocity; throws ClassificationError otherwise.
FlowClass classify_flow(const GasState& state, const GasParams& p);

/// The state observed through a reversal of the pipe axis: (rho, -u, p).
inline GasState mirror(const GasState& state) {
  return {state.rho, -state.u, state.p};
}

/// Flux of a mirrored state: mass and energy components change sign.
inline Vec3 mirror_flux(const Vec3& f) { return {-f[0], f[1], -f[2]}; }

}  // namespace pipenet
