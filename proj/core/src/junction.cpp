#include "pipenet/junction.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace pipenet {

int JunctionProblem::n_outgoing() const {
  return static_cast<int>(
      std::count(classes.begin(), classes.end(), FlowClass::Outgoing));
}

void validate_problem(const JunctionProblem& problem) {
  const size_t n = problem.pipes.size();
  if (n < 2) {
    throw InvalidProblemError("junction requires at least two pipes");
  }
  if (problem.traces.size() != n || problem.classes.size() != n) {
    throw InvalidProblemError(
        "junction problem has inconsistent pipe/trace/class counts");
  }
  for (size_t i = 0; i < n; ++i) {
    const PipeSpec& spec = problem.pipes[i];
    if (!(std::isfinite(spec.nu_norm) && spec.nu_norm > 0.0)) {
      std::ostringstream os;
      os << "pipe " << i << ": nonpositive cross-section " << spec.nu_norm;
      throw InvalidProblemError(os.str());
    }
    require_valid(problem.traces[i], spec.gas, "junction trace");
    const double c = sound_speed(problem.traces[i], spec.gas);
    if (!(std::abs(problem.traces[i].u) < c)) {
      std::ostringstream os;
      os << "pipe " << i << ": trace is not strictly subsonic (|u|="
         << std::abs(problem.traces[i].u) << ", c=" << c << ")";
      throw ClassificationError(os.str());
    }
    for (size_t j = i + 1; j < n; ++j) {
      if (!spec.label.empty() && spec.label == problem.pipes[j].label) {
        throw InvalidProblemError("duplicate pipe label '" + spec.label + "'");
      }
    }
  }
  const int n_out = problem.n_outgoing();
  if (n_out <= 0 || n_out >= static_cast<int>(n)) {
    std::ostringstream os;
    os << "junction needs 0 < N_o < N, got N_o=" << n_out << " of N=" << n;
    throw InvalidProblemError(os.str());
  }
  if (problem.mode != CouplingMode::EntropyMix && n_out != 1) {
    std::ostringstream os;
    os << "pressure-based coupling requires exactly one outgoing pipe, got "
       << n_out;
    throw InvalidProblemError(os.str());
  }
}

CanonicalJunction canonicalize(const JunctionProblem& problem) {
  validate_problem(problem);
  const int n = problem.size();

  std::vector<int> order;
  order.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (problem.classes[i] == FlowClass::Outgoing) order.push_back(i);
  }
  const int n_out = static_cast<int>(order.size());

  // Incoming pipes follow, the one with maximal entropy first.
  std::vector<int> incoming;
  for (int i = 0; i < n; ++i) {
    if (problem.classes[i] == FlowClass::Incoming) incoming.push_back(i);
  }
  int ref = 0;
  double s_max = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < incoming.size(); ++k) {
    const int i = incoming[k];
    const double s = entropy(problem.traces[i], problem.pipes[i].gas);
    if (s > s_max) {
      s_max = s;
      ref = static_cast<int>(k);
    }
  }
  std::swap(incoming[0], incoming[ref]);
  order.insert(order.end(), incoming.begin(), incoming.end());

  CanonicalJunction canon;
  canon.n_out = n_out;
  canon.to_user = order;
  canon.problem.mode = problem.mode;
  canon.problem.pipes.reserve(n);
  canon.problem.traces.reserve(n);
  canon.problem.classes.reserve(n);
  for (int i : order) {
    canon.problem.pipes.push_back(problem.pipes[i]);
    canon.problem.traces.push_back(problem.traces[i]);
    canon.problem.classes.push_back(problem.classes[i]);
  }
  return canon;
}

CouplingParams initial_params(const CanonicalJunction& junction) {
  CouplingParams params;
  params.sigma.reserve(junction.size());
  for (const GasState& trace : junction.problem.traces) {
    params.sigma.push_back(trace.p);
  }
  params.tau.assign(junction.n_out, 0.0);
  return params;
}

namespace {

// Trace state on the composed Lax curves of one pipe together with the
// quantities entering the coupling conditions and their parameter
// derivatives. With rho = phi(sigma) + tau and u = u_bar + psi(sigma):
//   q = rho u,   h = gamma sigma / ((gamma-1) rho) + u^2/2,
//   s = c_v ln(sigma / rho^gamma).
struct CurveEval {
  GasState y;
  double q, h, s;
  double q_sigma, h_sigma, s_sigma;
  double q_tau, h_tau, s_tau;  // zero for incoming pipes
};

CurveEval eval_curve(double sigma, double tau, bool outgoing,
                     const GasState& base, const GasParams& params) {
  const double g = params.gamma;
  const double rho_wave = phi(sigma, base, params);
  const double u = base.u + psi(sigma, base, params);
  const double rho = outgoing ? rho_wave + tau : rho_wave;
  if (!(std::isfinite(rho) && rho > 0.0)) {
    std::ostringstream os;
    os << "junction curve state left the state space (rho=" << rho << ")";
    throw InvalidStateError(os.str());
  }

  CurveEval e;
  e.y = {rho, u, sigma};
  e.q = rho * u;
  e.h = g * sigma / ((g - 1.0) * rho) + 0.5 * u * u;
  e.s = params.c_v * std::log(sigma / std::pow(rho, g));

  const double dphi = phi_dp(sigma, base, params);
  const double dpsi = psi_dp(sigma, base, params);
  e.q_sigma = dphi * u + rho * dpsi;
  e.h_sigma = g * (rho - sigma * dphi) / ((g - 1.0) * rho * rho) + u * dpsi;
  e.s_sigma = params.c_v * (1.0 / sigma - g * dphi / rho);
  if (outgoing) {
    e.q_tau = u;
    e.h_tau = -g * sigma / ((g - 1.0) * rho * rho);
    e.s_tau = -g * params.c_v / rho;
  } else {
    e.q_tau = e.h_tau = e.s_tau = 0.0;
  }
  return e;
}

std::vector<CurveEval> eval_all(const CanonicalJunction& junction,
                                const CouplingParams& params) {
  const int n = junction.size();
  std::vector<CurveEval> evals;
  evals.reserve(n);
  for (int i = 0; i < n; ++i) {
    const bool outgoing = i < junction.n_out;
    evals.push_back(eval_curve(params.sigma[i], outgoing ? params.tau[i] : 0.0,
                               outgoing, junction.problem.traces[i],
                               junction.problem.pipes[i].gas));
  }
  return evals;
}

double inflow_scale(const CanonicalJunction& junction) {
  double scale = 0.0;
  for (int i = 0; i < junction.size(); ++i) {
    const GasState& trace = junction.problem.traces[i];
    const double c = sound_speed(trace, junction.problem.pipes[i].gas);
    scale = std::max(scale, junction.problem.pipes[i].nu_norm * trace.rho * c);
  }
  return scale;
}

// s* and its denominator from already-evaluated curve quantities.
struct EntropyMixEval {
  double value = 0.0;
  double denominator = 0.0;
};

EntropyMixEval mix_from_evals(const CanonicalJunction& junction,
                              const std::vector<CurveEval>& evals) {
  EntropyMixEval mix;
  double numerator = 0.0;
  for (int j = junction.n_out; j < junction.size(); ++j) {
    const double nu = junction.problem.pipes[j].nu_norm;
    mix.denominator += nu * evals[j].q;
    numerator += nu * evals[j].q * evals[j].s;
  }
  if (std::abs(mix.denominator) < 1e-12 * inflow_scale(junction)) {
    std::ostringstream os;
    os << "entropy mix undefined: net incoming mass flux "
       << mix.denominator << " is numerically zero";
    throw DegenerateInflowError(os.str());
  }
  mix.value = numerator / mix.denominator;
  return mix;
}

}  // namespace

StarTrace star_trace_quantities(double sigma, std::optional<double> tau,
                                const GasState& base, const GasParams& params) {
  const CurveEval e =
      eval_curve(sigma, tau.value_or(0.0), tau.has_value(), base, params);
  return {e.q, e.h, e.s};
}

double entropy_mix(const CanonicalJunction& junction,
                   std::span<const double> sigma) {
  CouplingParams params;
  params.sigma.assign(sigma.begin(), sigma.end());
  params.tau.assign(junction.n_out, 0.0);
  const std::vector<CurveEval> evals = eval_all(junction, params);
  return mix_from_evals(junction, evals).value;
}

namespace {

std::vector<double> residual_from_evals(const CanonicalJunction& junction,
                                        const std::vector<CurveEval>& evals) {
  const int n = junction.size();
  const int n_out = junction.n_out;

  double mass = 0.0;
  for (int i = 0; i < n; ++i) {
    mass += junction.problem.pipes[i].nu_norm * evals[i].q;
  }

  if (junction.problem.mode == CouplingMode::EntropyMix) {
    std::vector<double> rows(static_cast<size_t>(n) + n_out);
    rows[0] = mass;
    const double h_ref = evals[n_out].h;  // first incoming pipe
    int r = 1;
    for (int k = 0; k < n; ++k) {
      if (k == n_out) continue;
      rows[r++] = h_ref - evals[k].h;
    }
    const EntropyMixEval mix = mix_from_evals(junction, evals);
    for (int i = 0; i < n_out; ++i) {
      rows[r++] = evals[i].s - mix.value;
    }
    return rows;
  }

  // Pressure modes: mass row, energy-flux row, N-1 equality rows vs pipe 1.
  const bool dynamic = junction.problem.mode == CouplingMode::DynamicPressureEqual;
  std::vector<double> rows(static_cast<size_t>(n) + 1);
  rows[0] = mass;
  double energy = 0.0;
  for (int i = 0; i < n; ++i) {
    energy += junction.problem.pipes[i].nu_norm * evals[i].q * evals[i].h;
  }
  rows[1] = energy;
  auto coupling_value = [&](int i) {
    return dynamic ? evals[i].q * evals[i].y.u + evals[i].y.p : evals[i].y.p;
  };
  for (int k = 1; k < n; ++k) {
    rows[1 + k] = coupling_value(0) - coupling_value(k);
  }
  return rows;
}

}  // namespace

std::vector<double> coupling_residual(const CanonicalJunction& junction,
                                      const CouplingParams& params) {
  return residual_from_evals(junction, eval_all(junction, params));
}

Mat coupling_jacobian(const CanonicalJunction& junction,
                      const CouplingParams& params) {
  const int n = junction.size();
  const int n_out = junction.n_out;
  const int d = junction.dim();
  const std::vector<CurveEval> evals = eval_all(junction, params);
  auto nu = [&](int i) { return junction.problem.pipes[i].nu_norm; };
  // Column layout: sigma_0..sigma_{n-1}, tau_0..tau_{n_out-1}.
  const int tau_col = n;

  Mat jac(d, d);

  for (int i = 0; i < n; ++i) {
    jac(0, i) = nu(i) * evals[i].q_sigma;
  }
  for (int i = 0; i < n_out; ++i) {
    jac(0, tau_col + i) = nu(i) * evals[i].q_tau;
  }

  if (junction.problem.mode == CouplingMode::EntropyMix) {
    const int ref = n_out;
    int r = 1;
    for (int k = 0; k < n; ++k) {
      if (k == ref) continue;
      jac(r, ref) = evals[ref].h_sigma;
      jac(r, k) = -evals[k].h_sigma;
      if (k < n_out) jac(r, tau_col + k) = -evals[k].h_tau;
      ++r;
    }

    const EntropyMixEval mix = mix_from_evals(junction, evals);
    // d s*/d sigma_j = |nu_j| (q_j'(s_j - s*) + q_j s_j') / denominator.
    std::vector<double> mix_sigma(n, 0.0);
    for (int j = n_out; j < n; ++j) {
      mix_sigma[j] = nu(j) *
                     (evals[j].q_sigma * (evals[j].s - mix.value) +
                      evals[j].q * evals[j].s_sigma) /
                     mix.denominator;
    }
    for (int i = 0; i < n_out; ++i) {
      jac(r, i) = evals[i].s_sigma;
      jac(r, tau_col + i) = evals[i].s_tau;
      for (int j = n_out; j < n; ++j) {
        jac(r, j) = -mix_sigma[j];
      }
      ++r;
    }
    return jac;
  }

  const bool dynamic = junction.problem.mode == CouplingMode::DynamicPressureEqual;
  for (int i = 0; i < n; ++i) {
    jac(1, i) = nu(i) * (evals[i].q_sigma * evals[i].h + evals[i].q * evals[i].h_sigma);
  }
  jac(1, tau_col) = nu(0) * (evals[0].q_tau * evals[0].h + evals[0].q * evals[0].h_tau);

  // d(rho u^2 + p)/d sigma and /d tau; for plain pressure equality the
  // coupling value is sigma itself.
  auto value_sigma = [&](int i) {
    if (!dynamic) return 1.0;
    const GasState& base = junction.problem.traces[i];
    const GasParams& gp = junction.problem.pipes[i].gas;
    const double dphi = phi_dp(evals[i].y.p, base, gp);
    const double dpsi = psi_dp(evals[i].y.p, base, gp);
    const double u = evals[i].y.u;
    return dphi * u * u + 2.0 * evals[i].y.rho * u * dpsi + 1.0;
  };
  auto value_tau = [&](int i) {
    return dynamic ? evals[i].y.u * evals[i].y.u : 0.0;
  };
  for (int k = 1; k < n; ++k) {
    jac(1 + k, 0) = value_sigma(0);
    jac(1 + k, k) = -value_sigma(k);
    jac(1 + k, tau_col) = value_tau(0);
  }
  return jac;
}

std::vector<double> residual_scales(const CanonicalJunction& junction) {
  const int n = junction.size();
  const int n_out = junction.n_out;

  double flux_scale = 0.0;
  double h_scale = 0.0;
  double s_scale = 0.0;
  double p_scale = 0.0;
  double dyn_scale = 0.0;
  for (int i = 0; i < n; ++i) {
    const GasState& trace = junction.problem.traces[i];
    const GasParams& gp = junction.problem.pipes[i].gas;
    const double c = sound_speed(trace, gp);
    flux_scale = std::max(flux_scale, junction.problem.pipes[i].nu_norm * trace.rho * c);
    h_scale = std::max(h_scale, enthalpy(trace, gp));
    s_scale = std::max(s_scale, std::abs(entropy(trace, gp)) + gp.gamma * gp.c_v);
    p_scale = std::max(p_scale, trace.p);
    dyn_scale = std::max(dyn_scale, trace.rho * trace.u * trace.u + trace.p);
  }

  if (junction.problem.mode == CouplingMode::EntropyMix) {
    std::vector<double> scales(static_cast<size_t>(n) + n_out, h_scale);
    scales[0] = flux_scale;
    for (int i = 0; i < n_out; ++i) {
      scales[n + i] = s_scale;
    }
    return scales;
  }
  std::vector<double> scales(static_cast<size_t>(n) + 1);
  scales[0] = flux_scale;
  scales[1] = flux_scale * h_scale;
  const double eq_scale =
      junction.problem.mode == CouplingMode::PressureEqual ? p_scale : dyn_scale;
  for (int k = 2; k <= n; ++k) scales[k] = eq_scale;
  return scales;
}

double scaled_residual_norm(const CanonicalJunction& junction,
                            std::span<const double> residual) {
  const std::vector<double> scales = residual_scales(junction);
  double norm = 0.0;
  for (size_t r = 0; r < residual.size(); ++r) {
    norm = std::max(norm, std::abs(residual[r]) / scales[r]);
  }
  return norm;
}

namespace {

JunctionBalance balance_of(const std::vector<GasState>& stars,
                           const std::vector<PipeSpec>& pipes) {
  JunctionBalance b;
  double max_mass = 0.0, max_energy = 0.0, max_entropy = 0.0;
  for (size_t i = 0; i < stars.size(); ++i) {
    const double nu = pipes[i].nu_norm;
    const double q = mass_flux(stars[i]);
    const double qh = q * enthalpy(stars[i], pipes[i].gas);
    const double qs = q * entropy(stars[i], pipes[i].gas);
    b.mass += nu * q;
    b.energy += nu * qh;
    b.entropy += nu * qs;
    max_mass = std::max(max_mass, std::abs(nu * q));
    max_energy = std::max(max_energy, std::abs(nu * qh));
    max_entropy = std::max(max_entropy, std::abs(nu * qs));
  }
  b.mass_rel = max_mass > 0.0 ? std::abs(b.mass) / max_mass : 0.0;
  b.energy_rel = max_energy > 0.0 ? std::abs(b.energy) / max_energy : 0.0;
  b.entropy_rel = max_entropy > 0.0 ? std::abs(b.entropy) / max_entropy : 0.0;
  return b;
}

// Reduction of the entropy-mix system to one scalar unknown, the common
// star enthalpy h*: each incoming sigma_j solves h_j(sigma_j) = h* (monotone
// on the subsonic branch), the mix s* then follows directly, each outgoing
// pipe solves h = h*, s = s* on its isentrope, and the single remaining
// equation is the mass balance, bisected in h*. Used to produce an initial
// guess near the physical root for data far from a coupled state.
std::optional<CouplingParams> reduced_guess(const CanonicalJunction& junction) {
  if (junction.problem.mode != CouplingMode::EntropyMix) return std::nullopt;
  const int n = junction.size();
  const int n_out = junction.n_out;

  // Root of a strictly increasing function above the given lower bound.
  auto bisect_above = [](auto f, double lo) -> std::optional<double> {
    if (!(f(lo) <= 0.0)) return std::nullopt;
    double hi = std::max(2.0 * lo, 1e-8);
    int guard = 0;
    while (f(hi) < 0.0) {
      hi *= 2.0;
      if (++guard > 80 || !std::isfinite(hi)) return std::nullopt;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };

  auto curve_u = [&](int i, double sigma) {
    return junction.problem.traces[i].u +
           psi(sigma, junction.problem.traces[i], junction.problem.pipes[i].gas);
  };
  auto curve_h = [&](int i, double sigma) {
    const GasState& base = junction.problem.traces[i];
    const GasParams& gp = junction.problem.pipes[i].gas;
    const double rho = phi(sigma, base, gp);
    return gp.gamma * sigma / ((gp.gamma - 1.0) * rho) +
           0.5 * curve_u(i, sigma) * curve_u(i, sigma);
  };

  // h along either curve is increasing only above the sonic pressure, so
  // every bracket starts there: u + c = 0 bounds the incoming search and
  // u = 0 (below which an outgoing star would reverse) the outgoing one.
  auto sonic_sigma = [&](int i) -> std::optional<double> {
    const GasState& base = junction.problem.traces[i];
    const GasParams& gp = junction.problem.pipes[i].gas;
    auto lambda3 = [&](double sigma) {
      const GasState y = lax3(sigma, base, gp);
      return y.u + sound_speed(y, gp);
    };
    return bisect_above(lambda3, 1e-12 * base.p);
  };
  auto zero_u_sigma = [&](int i) -> std::optional<double> {
    return bisect_above([&](double sigma) { return curve_u(i, sigma); },
                        1e-12 * junction.problem.traces[i].p);
  };

  std::vector<double> sigma_floor(n);
  for (int i = 0; i < n; ++i) {
    const auto floor =
        i < n_out ? zero_u_sigma(i) : sonic_sigma(i);
    if (!floor) return std::nullopt;
    sigma_floor[i] = *floor * (1.0 + 1e-12);
  }

  auto mass_at = [&](double h_star,
                     CouplingParams* params_out) -> std::optional<double> {
    CouplingParams params;
    params.sigma.assign(n, 0.0);
    params.tau.assign(n_out, 0.0);

    double inflow = 0.0;
    double mix_num = 0.0;
    for (int j = n_out; j < n; ++j) {
      const auto sigma = bisect_above(
          [&](double s) { return curve_h(j, s) - h_star; }, sigma_floor[j]);
      if (!sigma) return std::nullopt;
      params.sigma[j] = *sigma;
      const GasState& base = junction.problem.traces[j];
      const GasParams& gp = junction.problem.pipes[j].gas;
      const GasState y = lax3(*sigma, base, gp);
      const double flux = junction.problem.pipes[j].nu_norm * y.rho * y.u;
      inflow += flux;
      mix_num += flux * entropy(y, gp);
    }
    if (inflow == 0.0) return std::nullopt;
    const double s_star = mix_num / inflow;

    double mass = inflow;
    for (int i = 0; i < n_out; ++i) {
      const GasState& base = junction.problem.traces[i];
      const GasParams& gp = junction.problem.pipes[i].gas;
      const double a = std::exp(s_star / gp.c_v);
      auto h_on_isentrope = [&](double sigma) {
        const double rho = std::pow(sigma / a, 1.0 / gp.gamma);
        const double u = base.u + psi(sigma, base, gp);
        return gp.gamma * sigma / ((gp.gamma - 1.0) * rho) + 0.5 * u * u;
      };
      const auto sigma = bisect_above(
          [&](double s) { return h_on_isentrope(s) - h_star; }, sigma_floor[i]);
      if (!sigma) return std::nullopt;
      params.sigma[i] = *sigma;
      const double rho = std::pow(*sigma / a, 1.0 / gp.gamma);
      params.tau[i] = rho - phi(*sigma, base, gp);
      const double u = base.u + psi(*sigma, base, gp);
      mass += junction.problem.pipes[i].nu_norm * rho * u;
    }
    if (params_out) *params_out = std::move(params);
    return mass;
  };

  // Bracket h* around the trace enthalpies; the net flux grows with it and
  // an infeasibly low h* (below some pipe's sonic enthalpy) counts as the
  // negative side.
  double h_lo = std::numeric_limits<double>::infinity();
  double h_hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double h =
        enthalpy(junction.problem.traces[i], junction.problem.pipes[i].gas);
    h_lo = std::min(h_lo, h);
    h_hi = std::max(h_hi, h);
  }
  int guard = 0;
  while (true) {
    const auto m = mass_at(h_lo, nullptr);
    if (!m || *m <= 0.0) break;
    h_lo *= 0.75;
    if (++guard > 60) return std::nullopt;
  }
  while (true) {
    const auto m = mass_at(h_hi, nullptr);
    if (m && *m >= 0.0) break;
    h_hi *= 1.5;
    if (++guard > 120 || !std::isfinite(h_hi)) return std::nullopt;
  }
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (h_lo + h_hi);
    const auto m = mass_at(mid, nullptr);
    if (!m || *m < 0.0) {
      h_lo = mid;
    } else {
      h_hi = mid;
    }
  }
  CouplingParams params;
  if (!mass_at(h_hi, &params)) return std::nullopt;
  return params;
}

std::vector<GasState> star_states_canonical(const CanonicalJunction& junction,
                                            const CouplingParams& params) {
  std::vector<GasState> stars;
  stars.reserve(junction.size());
  for (int i = 0; i < junction.size(); ++i) {
    const GasState& base = junction.problem.traces[i];
    const GasParams& gp = junction.problem.pipes[i].gas;
    GasState y = lax3(params.sigma[i], base, gp);
    if (i < junction.n_out) y = lax2(params.tau[i], y, gp);
    stars.push_back(y);
  }
  return stars;
}

void check_star_regime(const CanonicalJunction& junction,
                       const std::vector<GasState>& stars) {
  for (int i = 0; i < junction.size(); ++i) {
    const GasParams& gp = junction.problem.pipes[i].gas;
    const double c = sound_speed(stars[i], gp);
    const int user = junction.to_user[i];
    if (!(std::abs(stars[i].u) < c)) {
      std::ostringstream os;
      os << "junction star state of pipe " << user
         << " is not subsonic (u=" << stars[i].u << ", c=" << c << ")";
      throw SupersonicStateError(os.str());
    }
    // A strict sign contradiction is a reversal; u* == 0 sits on the
    // boundary of both regimes and is accepted.
    const bool outgoing = i < junction.n_out;
    if ((outgoing && stars[i].u < 0.0) || (!outgoing && stars[i].u > 0.0)) {
      std::ostringstream os;
      os << "flow reversal at the junction: pipe " << user << " declared "
         << (outgoing ? "outgoing" : "incoming") << " but star velocity is "
         << stars[i].u;
      throw FlowReversalError(os.str());
    }
  }
}

}  // namespace

StarSolution solve_junction(const JunctionProblem& problem,
                            const SolveOptions& options) {
  const CanonicalJunction junction = canonicalize(problem);
  const int n = junction.size();
  const int n_out = junction.n_out;
  const int d = junction.dim();
  const std::vector<double> scales = residual_scales(junction);

  auto unpack = [&](const Eigen::VectorXd& x) {
    CouplingParams params;
    params.sigma.assign(x.data(), x.data() + n);
    params.tau.assign(x.data() + n, x.data() + d);
    return params;
  };
  auto scaled_norm = [&](const std::vector<double>& res) {
    double norm = 0.0;
    for (int r = 0; r < d; ++r) norm = std::max(norm, std::abs(res[r]) / scales[r]);
    return norm;
  };
  // Line-search merit: the Newton direction is a descent direction for the
  // scaled least-squares functional, so acceptance on it cannot stall away
  // from machine precision; convergence is still declared on the max-norm.
  auto merit = [&](const std::vector<double>& res) {
    double sum = 0.0;
    for (int r = 0; r < d; ++r) {
      const double v = res[r] / scales[r];
      sum += v * v;
    }
    return sum;
  };
  // Residual evaluation that reports invalid parameter vectors (nonpositive
  // pressures, vacuum densities, sonic curve states, degenerate mix
  // mid-iteration) instead of throwing, so the line search can back off.
  // Restricting the iterates to the subsonic region keeps Newton inside the
  // basin of the physical root.
  auto try_residual = [&](const Eigen::VectorXd& x,
                          std::vector<double>& out) -> bool {
    for (int i = 0; i < n; ++i) {
      if (!(x[i] > 0.0) || !std::isfinite(x[i])) return false;
    }
    for (int i = n; i < d; ++i) {
      if (!std::isfinite(x[i])) return false;
    }
    try {
      const CouplingParams params = unpack(x);
      const std::vector<CurveEval> evals = eval_all(junction, params);
      for (int i = 0; i < n; ++i) {
        const GasParams& gp = junction.problem.pipes[i].gas;
        const double c = std::sqrt(gp.gamma * evals[i].y.p / evals[i].y.rho);
        if (!(std::abs(evals[i].y.u) < c)) return false;
      }
      out = residual_from_evals(junction, evals);
    } catch (const Error&) {
      return false;
    }
    for (double v : out) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  };

  const CouplingParams start =
      options.initial_guess ? *options.initial_guess : initial_params(junction);
  if (static_cast<int>(start.sigma.size()) != n ||
      static_cast<int>(start.tau.size()) != n_out) {
    throw InvalidProblemError("initial guess has wrong dimensions");
  }

  Eigen::VectorXd x(d);
  for (int i = 0; i < n; ++i) x[i] = start.sigma[i];
  for (int i = 0; i < n_out; ++i) x[n + i] = start.tau[i];

  // The first evaluation throws through to the caller: a degenerate inflow
  // or invalid trace at the starting point is a property of the data.
  const std::vector<double> residual0 = coupling_residual(junction, unpack(x));
  std::vector<double> residual = residual0;
  double norm = scaled_norm(residual);

  const double floor_tol = 64.0 * std::numeric_limits<double>::epsilon();
  int iterations = 0;

  // Damped Newton on the system shifted by a constant offset,
  // Phi(x) - offset = 0, accepting steps on the scaled least-squares merit.
  // Iterates down to stop_norm (or stagnation) and reports whether the
  // scaled max-norm of the shifted residual reached tol.
  auto newton_stage = [&](const std::vector<double>& offset, double tol,
                          double stop_norm, int budget) -> bool {
    auto shifted = [&](const std::vector<double>& res) {
      std::vector<double> out(res.size());
      for (int r = 0; r < d; ++r) out[r] = res[r] - offset[r];
      return out;
    };
    std::vector<double> shift_res = shifted(residual);
    double stage_norm = scaled_norm(shift_res);
    double merit_value = merit(shift_res);
    double prev_norm = std::numeric_limits<double>::infinity();
    for (int it = 0; it < budget; ++it) {
      if (stage_norm <= std::max(stop_norm, floor_tol)) break;
      const Mat jac = coupling_jacobian(junction, unpack(x));
      using RowMajorMat =
          Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      const Eigen::MatrixXd J = Eigen::Map<const RowMajorMat>(jac.data(), d, d);
      const Eigen::VectorXd rhs =
          -Eigen::Map<const Eigen::VectorXd>(shift_res.data(), d);
      const Eigen::VectorXd step = J.partialPivLu().solve(rhs);
      if (!step.allFinite()) break;

      double lambda = 1.0;
      bool accepted = false;
      std::vector<double> trial_res;
      for (int bt = 0; bt <= options.max_backtracks; ++bt) {
        const Eigen::VectorXd trial = x + lambda * step;
        if (try_residual(trial, trial_res)) {
          const std::vector<double> trial_shifted = shifted(trial_res);
          const double trial_merit = merit(trial_shifted);
          if (trial_merit < merit_value) {
            x = trial;
            residual = trial_res;
            shift_res = trial_shifted;
            merit_value = trial_merit;
            prev_norm = stage_norm;
            stage_norm = scaled_norm(shift_res);
            accepted = true;
            break;
          }
        }
        lambda *= 0.5;
      }
      ++iterations;
      if (!accepted) break;
      if (stage_norm <= tol && stage_norm >= 0.9 * prev_norm) break;
    }
    norm = scaled_norm(residual);
    return stage_norm <= std::max(tol, floor_tol);
  };

  if (norm > options.tolerance) {
    const std::vector<double> zero_offset(d, 0.0);
    bool solved = newton_stage(zero_offset, options.tolerance, floor_tol,
                               options.max_iterations);

    std::optional<CouplingParams> reduction;
    if (!solved) {
      // Restart from the enthalpy-reduction guess, which is itself a
      // near-root for any admissible entropy-mix data.
      reduction = reduced_guess(junction);
      if (reduction) {
        Eigen::VectorXd restart(d);
        for (int i = 0; i < n; ++i) restart[i] = reduction->sigma[i];
        for (int i = 0; i < n_out; ++i) restart[n + i] = reduction->tau[i];
        std::vector<double> restart_res;
        if (try_residual(restart, restart_res)) {
          x = restart;
          residual = restart_res;
          solved = newton_stage(zero_offset, options.tolerance, floor_tol,
                                options.max_iterations);
        }
      }
    }

    if (!solved) {
      // Restart from the common pressure that balances the mass row with
      // all tau = 0; for far-from-coupled data it lands inside the basin of
      // the physical root (for a two-pipe junction it is the root pressure).
      auto mass_sum = [&](double p) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
          const GasState state =
              lax3(p, junction.problem.traces[i], junction.problem.pipes[i].gas);
          sum += junction.problem.pipes[i].nu_norm * state.rho * state.u;
        }
        return sum;
      };
      double lo = junction.problem.traces[0].p;
      double hi = lo;
      for (const GasState& trace : junction.problem.traces) {
        lo = std::min(lo, trace.p);
        hi = std::max(hi, trace.p);
      }
      int guard = 0;
      while (mass_sum(lo) > 0.0 && ++guard < 60) lo *= 0.5;
      while (mass_sum(hi) < 0.0 && ++guard < 120) hi *= 2.0;
      if (guard < 120 && mass_sum(lo) <= 0.0 && mass_sum(hi) >= 0.0) {
        for (int it = 0; it < 200; ++it) {
          const double mid = 0.5 * (lo + hi);
          (mass_sum(mid) < 0.0 ? lo : hi) = mid;
        }
        const double balanced = 0.5 * (lo + hi);
        Eigen::VectorXd restart(d);
        for (int i = 0; i < n; ++i) restart[i] = balanced;
        for (int i = n; i < d; ++i) restart[i] = 0.0;
        std::vector<double> restart_res;
        if (try_residual(restart, restart_res)) {
          x = restart;
          residual = restart_res;
          solved = newton_stage(zero_offset, options.tolerance, floor_tol,
                                options.max_iterations);
        }
      }
    }

    if (!solved) {
      // Continuation fallback for data far from a coupled state: follow the
      // global homotopy Phi(x) = (1 - theta) Phi(x_base) from the exact root
      // x_base of the theta = 0 system (the reduction guess when available,
      // the trace point otherwise), shrinking the theta step on failure.
      Eigen::VectorXd x_base(d);
      for (int i = 0; i < n; ++i) x_base[i] = start.sigma[i];
      for (int i = 0; i < n_out; ++i) x_base[n + i] = start.tau[i];
      std::vector<double> res_base = residual0;
      if (reduction) {
        Eigen::VectorXd candidate(d);
        for (int i = 0; i < n; ++i) candidate[i] = reduction->sigma[i];
        for (int i = 0; i < n_out; ++i) candidate[n + i] = reduction->tau[i];
        std::vector<double> candidate_res;
        if (try_residual(candidate, candidate_res) &&
            scaled_norm(candidate_res) < scaled_norm(res_base)) {
          x_base = candidate;
          res_base = candidate_res;
        }
      }
      x = x_base;
      residual = res_base;
      const std::vector<double> residual_base = res_base;
      double theta = 0.0;
      double dtheta = 0.25;
      int stages = 0;
      while (theta < 1.0 && dtheta >= 1.0 / 4096.0 && stages < 256) {
        const double theta_next = std::min(1.0, theta + dtheta);
        std::vector<double> offset(d);
        for (int r = 0; r < d; ++r) {
          offset[r] = (1.0 - theta_next) * residual_base[r];
        }
        const double stage_tol =
            theta_next == 1.0 ? options.tolerance : 1e-8;
        const double stage_stop = theta_next == 1.0 ? floor_tol : stage_tol;
        const Eigen::VectorXd x_saved = x;
        const std::vector<double> res_saved = residual;
        ++stages;
        if (newton_stage(offset, stage_tol, stage_stop,
                         options.max_iterations)) {
          theta = theta_next;
          dtheta = std::min(0.5, 1.5 * dtheta);
        } else {
          x = x_saved;
          residual = res_saved;
          dtheta *= 0.5;
        }
      }
      solved = theta >= 1.0 && norm <= options.tolerance;
    }

    if (!solved) {
      std::ostringstream os;
      os << "junction Newton did not converge (scaled residual " << norm
         << " after " << iterations
         << " iterations); data may lie outside the well-posedness "
            "neighbourhood or the flow direction changes at the star state";
      throw NoConvergenceError(os.str());
    }
  }

  const CouplingParams root = unpack(x);
  const std::vector<GasState> stars_canonical =
      star_states_canonical(junction, root);
  check_star_regime(junction, stars_canonical);

  StarSolution solution;
  solution.sigma.resize(n);
  solution.tau.assign(n, 0.0);
  solution.star_states.resize(n);
  for (int c = 0; c < n; ++c) {
    const int user = junction.to_user[c];
    solution.sigma[user] = root.sigma[c];
    if (c < n_out) solution.tau[user] = root.tau[c];
    solution.star_states[user] = stars_canonical[c];
  }
  solution.residual_norm = norm;
  solution.iterations = iterations;
  solution.balance = balance_of(solution.star_states, problem.pipes);
  return solution;
}

JunctionBalance verify_conservation(const StarSolution& solution,
                                    const JunctionProblem& problem) {
  return balance_of(solution.star_states, problem.pipes);
}

BasePointDerivatives base_point_derivatives(const CanonicalJunction& junction) {
  const int n = junction.size();
  const int n_out = junction.n_out;

  BasePointDerivatives d;
  d.q_hat_sigma.resize(n);
  d.h_sigma.resize(n);
  d.q_hat_tau.resize(n_out);
  d.h_tau.resize(n_out);
  d.s_tau.resize(n_out);
  d.s_star_sigma.resize(n - n_out);

  double inflow = 0.0;
  for (int j = n_out; j < n; ++j) {
    inflow += junction.problem.pipes[j].nu_norm *
              mass_flux(junction.problem.traces[j]);
  }
  std::vector<double> sigma0;
  for (const GasState& trace : junction.problem.traces) sigma0.push_back(trace.p);
  const double s_star = entropy_mix(junction, sigma0);

  for (int i = 0; i < n; ++i) {
    const GasState& trace = junction.problem.traces[i];
    const GasParams& gp = junction.problem.pipes[i].gas;
    const double nu = junction.problem.pipes[i].nu_norm;
    const double c = sound_speed(trace, gp);
    const double lambda3 = trace.u + c;
    d.q_hat_sigma[i] = nu * lambda3 / (c * c);
    d.h_sigma[i] = lambda3 / (c * trace.rho);
    if (i < n_out) {
      d.q_hat_tau[i] = nu * trace.u;  // lambda_2
      d.h_tau[i] = -c * c / ((gp.gamma - 1.0) * trace.rho);
      d.s_tau[i] = -gp.gamma * gp.c_v / trace.rho;
    } else {
      const double s = entropy(trace, gp);
      d.s_star_sigma[i - n_out] =
          nu * lambda3 / (c * c) * (s - s_star) / inflow;
    }
  }
  return d;
}

CouplingBlocks coupling_d_matrices(const CanonicalJunction& junction) {
  if (junction.problem.mode != CouplingMode::EntropyMix) {
    throw InvalidProblemError(
        "coupling blocks are defined for the entropy-mix conditions");
  }
  const BasePointDerivatives d = base_point_derivatives(junction);
  CouplingBlocks blocks;
  const int ref = junction.n_out;  // canonical index of the reference pipe
  for (int i = 0; i < junction.n_out; ++i) {
    Mat m(3, 3);
    m(0, 0) = d.q_hat_sigma[i];
    m(0, 1) = d.q_hat_sigma[ref];
    m(0, 2) = d.q_hat_tau[i];
    m(1, 0) = -d.h_sigma[i];
    m(1, 1) = d.h_sigma[ref];
    m(1, 2) = -d.h_tau[i];
    m(2, 0) = 0.0;
    m(2, 1) = -d.s_star_sigma[0];
    m(2, 2) = d.s_tau[i];
    const double det =
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
        m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
        m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    blocks.d_matrices.push_back(m);
    blocks.determinants.push_back(det);
  }
  return blocks;
}

LipschitzStats lipschitz_probe(const JunctionProblem& problem, double delta,
                               int trials, std::uint64_t seed,
                               PerturbationKind kind) {
  LipschitzStats stats;
  if (trials <= 0 || delta == 0.0) return stats;

  const StarSolution base = solve_junction(problem);
  const int n = problem.size();
  std::vector<Vec3> base_cons(n);
  for (int i = 0; i < n; ++i) {
    base_cons[i] =
        primitive_to_conservative(base.star_states[i], problem.pipes[i].gas);
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  double sum_ratio = 0.0;
  for (int t = 0; t < trials; ++t) {
    JunctionProblem perturbed = problem;
    double data_dist = 0.0;
    if (kind == PerturbationKind::Traces) {
      for (int i = 0; i < n; ++i) {
        GasState& trace = perturbed.traces[i];
        const double c = sound_speed(trace, problem.pipes[i].gas);
        trace.rho *= 1.0 + delta * unit(rng);
        trace.u += delta * c * unit(rng);
        trace.p *= 1.0 + delta * unit(rng);
        const Vec3 a =
            primitive_to_conservative(trace, problem.pipes[i].gas);
        const Vec3 b = primitive_to_conservative(problem.traces[i],
                                                 problem.pipes[i].gas);
        data_dist += std::sqrt((a[0] - b[0]) * (a[0] - b[0]) +
                               (a[1] - b[1]) * (a[1] - b[1]) +
                               (a[2] - b[2]) * (a[2] - b[2]));
      }
    } else {
      for (int i = 0; i < n; ++i) {
        const double old_nu = perturbed.pipes[i].nu_norm;
        perturbed.pipes[i].nu_norm *= 1.0 + delta * unit(rng);
        data_dist += std::abs(perturbed.pipes[i].nu_norm - old_nu);
      }
    }
    if (data_dist == 0.0) continue;

    const StarSolution sol = solve_junction(perturbed);
    double sol_dist = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec3 cons = primitive_to_conservative(sol.star_states[i],
                                                  perturbed.pipes[i].gas);
      for (int c = 0; c < 3; ++c) {
        sol_dist = std::max(sol_dist, std::abs(cons[c] - base_cons[i][c]));
      }
    }
    const double ratio = sol_dist / data_dist;
    stats.max_ratio = std::max(stats.max_ratio, ratio);
    sum_ratio += ratio;
    ++stats.trials;
  }
  if (stats.trials > 0) stats.mean_ratio = sum_ratio / stats.trials;
  return stats;
}

}  // namespace pipenet
