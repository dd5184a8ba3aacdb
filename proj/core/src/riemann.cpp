#include "pipenet/riemann.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pipenet {

namespace {

void require_pressure(double p_star, const char* context) {
  if (!(std::isfinite(p_star) && p_star > 0.0)) {
    std::ostringstream os;
    os << context << ": nonpositive star pressure " << p_star;
    throw InvalidStateError(os.str());
  }
}

}  // namespace

double psi(double p_star, const GasState& state, const GasParams& params) {
  require_pressure(p_star, "psi");
  require_valid(state, params, "psi");
  const double g = params.gamma;
  if (p_star <= state.p) {  // rarefaction
    const double c = sound_speed(state, params);
    return 2.0 * c / (g - 1.0) *
           (std::pow(p_star / state.p, (g - 1.0) / (2.0 * g)) - 1.0);
  }
  const double mu2 = params.mu_sq();  // shock
  return (p_star - state.p) *
         std::sqrt((1.0 - mu2) / (state.rho * (p_star + mu2 * state.p)));
}

double phi(double p_star, const GasState& state, const GasParams& params) {
  require_pressure(p_star, "phi");
  require_valid(state, params, "phi");
  const double g = params.gamma;
  if (p_star <= state.p) {  // rarefaction, isentropic
    return state.rho * std::pow(p_star / state.p, 1.0 / g);
  }
  const double mu2 = params.mu_sq();  // shock
  return state.rho * (p_star + mu2 * state.p) / (mu2 * p_star + state.p);
}

double psi_dp(double p_star, const GasState& state, const GasParams& params) {
  require_pressure(p_star, "psi_dp");
  require_valid(state, params, "psi_dp");
  const double g = params.gamma;
  if (p_star <= state.p) {
    const double c = sound_speed(state, params);
    return c / (g * state.p) *
           std::pow(p_star / state.p, -(g + 1.0) / (2.0 * g));
  }
  const double mu2 = params.mu_sq();
  const double b = p_star + mu2 * state.p;
  const double root = std::sqrt((1.0 - mu2) / (state.rho * b));
  return root * (1.0 - (p_star - state.p) / (2.0 * b));
}

double phi_dp(double p_star, const GasState& state, const GasParams& params) {
  require_pressure(p_star, "phi_dp");
  require_valid(state, params, "phi_dp");
  const double g = params.gamma;
  if (p_star <= state.p) {
    return state.rho / (g * state.p) *
           std::pow(p_star / state.p, 1.0 / g - 1.0);
  }
  const double mu2 = params.mu_sq();
  const double den = mu2 * p_star + state.p;
  return state.rho * state.p * (1.0 - mu2 * mu2) / (den * den);
}

StarState solve_star(const GasState& left, const GasState& right,
                     const GasParams& params) {
  require_valid(left, params, "solve_star(left)");
  require_valid(right, params, "solve_star(right)");
  const double c_l = sound_speed(left, params);
  const double c_r = sound_speed(right, params);

  if (right.u - left.u >= 2.0 * (c_l + c_r) / (params.gamma - 1.0)) {
    std::ostringstream os;
    os << "solve_star: vacuum forms, u_R - u_L = " << right.u - left.u
       << " exceeds the non-vacuum bound "
       << 2.0 * (c_l + c_r) / (params.gamma - 1.0);
    throw VacuumError(os.str());
  }

  const double vscale =
      std::max({1.0, std::abs(left.u), std::abs(right.u), c_l, c_r});
  const double accept_tol = 1e-12 * vscale;
  const double floor_tol = 8.0 * std::numeric_limits<double>::epsilon() * vscale;

  // Guarded Newton on the monotone star-pressure equation
  //   g(p) = psi(p, U_L) + psi(p, U_R) + u_R - u_L,
  // with a bracket maintained as a bisection fallback.
  double p = std::max(std::numeric_limits<double>::min(),
                      0.5 * (left.p + right.p));
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double residual = psi(p, left, params) + psi(p, right, params) +
                    (right.u - left.u);
  double prev_abs = std::numeric_limits<double>::infinity();

  constexpr int kMaxIter = 100;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    const double abs_res = std::abs(residual);
    if (abs_res <= floor_tol) break;
    if (abs_res <= accept_tol && abs_res >= 0.9 * prev_abs) break;
    prev_abs = abs_res;

    if (residual > 0.0) {
      hi = std::min(hi, p);
    } else {
      lo = std::max(lo, p);
    }
    const double slope = psi_dp(p, left, params) + psi_dp(p, right, params);
    double cand = p - residual / slope;
    if (!std::isfinite(cand) || cand <= lo || cand >= hi) {
      cand = std::isfinite(hi) ? 0.5 * (lo + hi)
                               : 2.0 * std::max({p, left.p, right.p});
    }
    p = cand;
    residual = psi(p, left, params) + psi(p, right, params) +
               (right.u - left.u);
  }

  if (std::abs(residual) > accept_tol) {
    std::ostringstream os;
    os << "solve_star: no convergence after " << kMaxIter
       << " iterations, residual " << residual;
    throw NoConvergenceError(os.str());
  }

  StarState star;
  star.p_star = p;
  star.u_star = 0.5 * ((left.u - psi(p, left, params)) +
                       (right.u + psi(p, right, params)));
  star.rho_left_star = phi(p, left, params);
  star.rho_right_star = phi(p, right, params);
  return star;
}

GasState lax1(double sigma, const GasState& left, const GasParams& params) {
  return {phi(sigma, left, params), left.u - psi(sigma, left, params), sigma};
}

GasState lax3(double sigma, const GasState& right, const GasParams& params) {
  return {phi(sigma, right, params), right.u + psi(sigma, right, params), sigma};
}

GasState lax2(double tau, const GasState& base, const GasParams& params) {
  require_valid(base, params, "lax2");
  const double rho = base.rho + tau;
  if (!(std::isfinite(rho) && rho > 0.0)) {
    std::ostringstream os;
    os << "lax2: density offset " << tau << " leaves the state space (rho="
       << rho << ")";
    throw InvalidStateError(os.str());
  }
  return {rho, base.u, base.p};
}

WaveFan build_wave_fan(const GasState& left, const GasState& right,
                       const GasParams& params) {
  WaveFan fan;
  fan.left = left;
  fan.right = right;
  fan.star = solve_star(left, right, params);

  const double g = params.gamma;
  const double beta = (g - 1.0) / (2.0 * g);
  const double c_l = sound_speed(left, params);
  const double c_r = sound_speed(right, params);

  if (fan.star.p_star > left.p) {
    const double q = std::sqrt((g + 1.0) / (2.0 * g) * (fan.star.p_star / left.p) +
                               (g - 1.0) / (2.0 * g));
    fan.wave1 = {WaveType::Shock, left.u - c_l * q, left.u - c_l * q};
  } else {
    const double c_star = c_l * std::pow(fan.star.p_star / left.p, beta);
    fan.wave1 = {WaveType::Rarefaction, left.u - c_l, fan.star.u_star - c_star};
  }

  fan.wave2 = {WaveType::Contact, fan.star.u_star, fan.star.u_star};

  if (fan.star.p_star > right.p) {
    const double q = std::sqrt((g + 1.0) / (2.0 * g) * (fan.star.p_star / right.p) +
                               (g - 1.0) / (2.0 * g));
    fan.wave3 = {WaveType::Shock, right.u + c_r * q, right.u + c_r * q};
  } else {
    const double c_star = c_r * std::pow(fan.star.p_star / right.p, beta);
    fan.wave3 = {WaveType::Rarefaction, fan.star.u_star + c_star, right.u + c_r};
  }
  return fan;
}

GasState sample_wave_fan(const WaveFan& fan, double xi, const GasParams& params) {
  const double g = params.gamma;
  if (xi < fan.star.u_star) {
    // Left of the contact.
    if (fan.wave1.type == WaveType::Shock) {
      if (xi < fan.wave1.head) return fan.left;
      return {fan.star.rho_left_star, fan.star.u_star, fan.star.p_star};
    }
    if (xi < fan.wave1.head) return fan.left;
    if (xi > fan.wave1.tail) {
      return {fan.star.rho_left_star, fan.star.u_star, fan.star.p_star};
    }
    const double c_l = sound_speed(fan.left, params);
    const double factor =
        2.0 / (g + 1.0) + (g - 1.0) / ((g + 1.0) * c_l) * (fan.left.u - xi);
    return {fan.left.rho * std::pow(factor, 2.0 / (g - 1.0)),
            2.0 / (g + 1.0) * (c_l + (g - 1.0) / 2.0 * fan.left.u + xi),
            fan.left.p * std::pow(factor, 2.0 * g / (g - 1.0))};
  }
  // Right of (or on) the contact.
  if (fan.wave3.type == WaveType::Shock) {
    if (xi > fan.wave3.tail) return fan.right;
    return {fan.star.rho_right_star, fan.star.u_star, fan.star.p_star};
  }
  if (xi > fan.wave3.tail) return fan.right;
  if (xi < fan.wave3.head) {
    return {fan.star.rho_right_star, fan.star.u_star, fan.star.p_star};
  }
  const double c_r = sound_speed(fan.right, params);
  const double factor =
      2.0 / (g + 1.0) - (g - 1.0) / ((g + 1.0) * c_r) * (fan.right.u - xi);
  return {fan.right.rho * std::pow(factor, 2.0 / (g - 1.0)),
          2.0 / (g + 1.0) * (-c_r + (g - 1.0) / 2.0 * fan.right.u + xi),
          fan.right.p * std::pow(factor, 2.0 * g / (g - 1.0))};
}

}  // namespace pipenet
