#pragma once

// Independent reference computations for the test suites. Everything here is
// coded directly from the closed forms, separately from the library paths it
// checks: the star pressure comes from plain bisection, the junction root
// from nested box refinement on an independently assembled residual, and the
// exact tube profile from the textbook sampling formulas.

#include <array>
#include <vector>

#include "pipenet/gas.hpp"
#include "pipenet/junction.hpp"

namespace pipenet::oracle {

double velocity_fn(double p, double rho_k, double p_k, double gamma);
double density_fn(double p, double rho_k, double p_k, double gamma);

struct StarRef {
  double p = 0.0;
  double u = 0.0;
  double rho_left = 0.0;
  double rho_right = 0.0;
};

/// Star state by bisection of the velocity-matching equation, 250 halvings.
StarRef star_by_bisection(const GasState& left, const GasState& right,
                          double gamma);

/// Exact self-similar solution of the Riemann problem at x/t = xi.
GasState exact_sample(const GasState& left, const GasState& right, double gamma,
                      double xi);

/// Independently assembled entropy-mix coupling residual (canonical order).
std::vector<double> coupling_residual_ref(const CanonicalJunction& junction,
                                          const std::vector<double>& sigma,
                                          const std::vector<double>& tau);

struct BoxRefineResult {
  std::vector<double> sigma;
  std::vector<double> tau;
  double residual_inf = 0.0;
};

/// Brute-force junction root: nested uniform parameter boxes around the
/// initial point, shrinking around the argmin of the residual max-norm.
BoxRefineResult junction_root_by_box_refinement(const CanonicalJunction& junction,
                                                double initial_radius,
                                                int levels);

/// Closed-form decay of the friction ODE q' = -k q |q| with k constant.
double friction_decay(double q0, double k, double t);

}  // namespace pipenet::oracle
