#include "pipenet/gas.hpp"

#include <cmath>
#include <sstream>

namespace pipenet {

bool is_valid(const GasParams& params) {
  return std::isfinite(params.gamma) && params.gamma > 1.0 &&
         std::isfinite(params.c_v) && params.c_v > 0.0;
}

bool is_valid(const GasState& state) {
  return std::isfinite(state.rho) && state.rho > 0.0 &&
         std::isfinite(state.u) && std::isfinite(state.p) && state.p > 0.0;
}

void require_valid(const GasState& state, const GasParams& params,
                   const char* context) {
  if (!is_valid(params)) {
    std::ostringstream os;
    os << context << ": invalid gas parameters (gamma=" << params.gamma
       << ", c_v=" << params.c_v << ")";
    throw InvalidStateError(os.str());
  }
  if (!is_valid(state)) {
    std::ostringstream os;
    os << context << ": invalid state (rho=" << state.rho << ", u=" << state.u
       << ", p=" << state.p << ")";
    throw InvalidStateError(os.str());
  }
}

double mass_flux(const GasState& state) { return state.rho * state.u; }

double total_energy(const GasState& state, const GasParams& p) {
  return state.p / (p.gamma - 1.0) + 0.5 * state.rho * state.u * state.u;
}

double sound_speed(const GasState& state, const GasParams& p) {
  return std::sqrt(p.gamma * state.p / state.rho);
}

double entropy(const GasState& state, const GasParams& p) {
  return p.c_v * std::log(state.p / std::pow(state.rho, p.gamma));
}

double enthalpy(const GasState& state, const GasParams& p) {
  return (total_energy(state, p) + state.p) / state.rho;
}

Vec3 primitive_to_conservative(const GasState& state, const GasParams& p) {
  require_valid(state, p, "primitive_to_conservative");
  return {state.rho, state.rho * state.u, total_energy(state, p)};
}

GasState conservative_to_primitive(const Vec3& cons, const GasParams& p) {
  const double rho = cons[0];
  if (!(std::isfinite(rho) && rho > 0.0)) {
    std::ostringstream os;
    os << "conservative_to_primitive: nonpositive density " << rho;
    throw InvalidStateError(os.str());
  }
  const double u = cons[1] / rho;
  const double pressure = (p.gamma - 1.0) * (cons[2] - cons[1] * cons[1] / (2.0 * rho));
  if (!(std::isfinite(pressure) && pressure > 0.0)) {
    std::ostringstream os;
    os << "conservative_to_primitive: recovered pressure " << pressure
       << " (vacuum or invalid cell)";
    throw InvalidStateError(os.str());
  }
  return {rho, u, pressure};
}

std::array<double, 3> eigenvalues(const GasState& state, const GasParams& p) {
  require_valid(state, p, "eigenvalues");
  const double c = sound_speed(state, p);
  return {state.u - c, state.u, state.u + c};
}

Vec3 physical_flux(const GasState& state, const GasParams& p) {
  require_valid(state, p, "physical_flux");
  const double q = state.rho * state.u;
  const double E = total_energy(state, p);
  return {q, q * state.u + state.p, state.u * (E + state.p)};
}

FlowClass classify_flow(const GasState& state, const GasParams& p) {
  require_valid(state, p, "classify_flow");
  const double c = sound_speed(state, p);
  if (!(std::abs(state.u) < c)) {
    std::ostringstream os;
    os << "classify_flow: state is not strictly subsonic (|u|=" << std::abs(state.u)
       << ", c=" << c << ")";
    throw ClassificationError(os.str());
  }
  if (state.u > 0.0) return FlowClass::Outgoing;
  if (state.u < 0.0) return FlowClass::Incoming;
  throw ClassificationError("classify_flow: zero velocity has no flow direction");
}

}  // namespace pipenet
