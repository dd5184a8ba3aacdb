#pragma once

#include <stdexcept>
#include <string>

namespace pipenet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nonpositive density/pressure, invalid gas parameters, or an argument
/// outside the domain of a thermodynamic function.
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

/// The non-vacuum condition u_R - u_L < 2(c_L + c_R)/(gamma - 1) failed.
class VacuumError : public Error {
 public:
  using Error::Error;
};

/// A state could not be assigned a flow direction (sonic, supersonic,
/// or exactly zero velocity).
class ClassificationError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its iteration cap above the acceptance tolerance.
class NoConvergenceError : public Error {
 public:
  using Error::Error;
};

/// The solved junction state contradicts the declared flow-direction split.
class FlowReversalError : public Error {
 public:
  using Error::Error;
};

/// The entropy-mix denominator (net incoming mass flux) is numerically zero.
class DegenerateInflowError : public Error {
 public:
  using Error::Error;
};

/// A junction star state left the subsonic region.
class SupersonicStateError : public Error {
 public:
  using Error::Error;
};

/// A junction problem violates its structural invariants (sizes, index
/// sets, mode restrictions).
class InvalidProblemError : public Error {
 public:
  using Error::Error;
};

/// Scenario file could not be parsed or failed schema/physics validation.
/// The message lists every violated constraint with its config path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Stable machine-readable token for an error class.
inline const char* error_kind(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const NoConvergenceError*>(&e)) return "no_convergence";
  if (dynamic_cast<const FlowReversalError*>(&e)) return "flow_reversal";
  if (dynamic_cast<const DegenerateInflowError*>(&e)) return "degenerate_inflow";
  if (dynamic_cast<const SupersonicStateError*>(&e)) return "supersonic_star";
  if (dynamic_cast<const InvalidProblemError*>(&e)) return "invalid_problem";
  if (dynamic_cast<const ClassificationError*>(&e)) return "classification";
  if (dynamic_cast<const VacuumError*>(&e)) return "vacuum";
  if (dynamic_cast<const InvalidStateError*>(&e)) return "invalid_state";
  return "error";
}

}  // namespace pipenet
