#include "pipenet/verify.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pipenet {

GasState random_subsonic_state(std::mt19937_64& rng, const GasParams& params,
                               double mach_max) {
  std::uniform_real_distribution<double> rho_dist(0.5, 2.0);
  std::uniform_real_distribution<double> p_dist(0.5, 2.0);
  std::uniform_real_distribution<double> mach_dist(-mach_max, mach_max);
  GasState s;
  s.rho = rho_dist(rng);
  s.p = p_dist(rng);
  s.u = mach_dist(rng) * sound_speed(s, params);
  return s;
}

namespace {

// Maximal subsonic speed at total enthalpy H: u^2 < 2 (gamma-1) H / (gamma+1).
double sonic_speed_bound(double enthalpy_total, const GasParams& gas) {
  return std::sqrt(2.0 * (gas.gamma - 1.0) * enthalpy_total / (gas.gamma + 1.0));
}

// State with total enthalpy H and entropy s at speed u > 0:
//   p / rho^gamma = exp(s / c_v),  gamma p / ((gamma-1) rho) = H - u^2/2.
GasState state_on_enthalpy_isentrope(double enthalpy_total, double s, double u,
                                     const GasParams& gas) {
  const double a = std::exp(s / gas.c_v);
  const double b = (enthalpy_total - 0.5 * u * u) * (gas.gamma - 1.0) / gas.gamma;
  const double rho = std::pow(b / a, 1.0 / (gas.gamma - 1.0));
  return {rho, u, a * std::pow(rho, gas.gamma)};
}

}  // namespace

JunctionProblem make_stationary_problem(std::mt19937_64& rng, int n_pipes,
                                        int n_outgoing, bool vary_gamma) {
  StationaryOptions options;
  options.vary_gamma = vary_gamma;
  return make_stationary_problem(rng, n_pipes, n_outgoing, options);
}

JunctionProblem make_stationary_problem(std::mt19937_64& rng, int n_pipes,
                                        int n_outgoing,
                                        const StationaryOptions& options) {
  if (!(n_pipes >= 2 && n_outgoing >= 1 && n_outgoing < n_pipes)) {
    throw InvalidProblemError("make_stationary_problem: bad N / N_o");
  }
  const bool vary_gamma = options.vary_gamma;
  std::uniform_real_distribution<double> h_dist(2.5, 5.0);
  std::uniform_real_distribution<double> rho_dist(options.rho_min,
                                                  options.rho_max);
  std::uniform_real_distribution<double> nu_dist(0.5, 2.0);
  std::uniform_real_distribution<double> cv_dist(0.7, 1.4);
  std::uniform_real_distribution<double> gamma_dist(1.25, 1.75);
  std::uniform_real_distribution<double> weight_dist(0.5, 1.5);

  const int n_in = n_pipes - n_outgoing;
  for (int attempt = 0; attempt < 64; ++attempt) {
    // Incoming speeds shrink on later attempts so the outgoing pipes can
    // always absorb the mass flux subsonically.
    const double theta_hi = options.theta_max * std::pow(0.7, attempt / 8);
    std::uniform_real_distribution<double> theta_dist(0.3 * theta_hi, theta_hi);

    const double enthalpy_total = h_dist(rng);
    JunctionProblem problem;
    problem.mode = CouplingMode::EntropyMix;

    std::vector<GasParams> gas(n_pipes);
    std::vector<double> nu(n_pipes);
    for (int i = 0; i < n_pipes; ++i) {
      gas[i].gamma = vary_gamma ? gamma_dist(rng) : 1.4;
      gas[i].c_v = vary_gamma ? cv_dist(rng) : 1.0;
      nu[i] = nu_dist(rng);
    }

    // Incoming traces first (they fix the entropy mix and the mass deficit).
    std::vector<GasState> incoming(n_in);
    double inflow = 0.0;
    double mix_num = 0.0;
    for (int j = 0; j < n_in; ++j) {
      const GasParams& g = gas[n_outgoing + j];
      const double u_cap = sonic_speed_bound(enthalpy_total, g);
      const double u = -theta_dist(rng) * u_cap;
      const double rho = rho_dist(rng);
      const double p = (enthalpy_total - 0.5 * u * u) * (g.gamma - 1.0) * rho / g.gamma;
      incoming[j] = {rho, u, p};
      const double flux = nu[n_outgoing + j] * rho * u;
      inflow += flux;
      mix_num += flux * entropy(incoming[j], g);
    }
    const double s_mix = mix_num / inflow;

    // Distribute the outgoing mass flux and solve each speed by bisection
    // of the monotone subsonic flux u -> rho(u) u.
    std::vector<double> weights(n_outgoing);
    double weight_sum = 0.0;
    for (double& w : weights) {
      w = weight_dist(rng);
      weight_sum += w;
    }
    bool ok = true;
    std::vector<GasState> outgoing(n_outgoing);
    double assigned = 0.0;
    for (int i = 0; i < n_outgoing && ok; ++i) {
      const GasParams& g = gas[i];
      const double target_total =
          i + 1 == n_outgoing ? -inflow - assigned
                              : -inflow * weights[i] / weight_sum;
      const double target_q = target_total / nu[i];
      if (!(target_q > 0.0)) {
        ok = false;
        break;
      }
      const double u_cap = 0.92 * sonic_speed_bound(enthalpy_total, g);
      auto flux_at = [&](double u) {
        return mass_flux(state_on_enthalpy_isentrope(enthalpy_total, s_mix, u, g));
      };
      if (flux_at(u_cap) < target_q) {
        ok = false;
        break;
      }
      double lo = 0.0, hi = u_cap;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (flux_at(mid) < target_q ? lo : hi) = mid;
      }
      const double u = 0.5 * (lo + hi);
      outgoing[i] = state_on_enthalpy_isentrope(enthalpy_total, s_mix, u, g);
      assigned += nu[i] * mass_flux(outgoing[i]);
    }
    if (!ok) continue;

    for (int i = 0; i < n_pipes; ++i) {
      PipeSpec spec;
      spec.nu_norm = nu[i];
      spec.gas = gas[i];
      spec.label = "pipe" + std::to_string(i);
      problem.pipes.push_back(spec);
      if (i < n_outgoing) {
        problem.traces.push_back(outgoing[i]);
        problem.classes.push_back(FlowClass::Outgoing);
      } else {
        problem.traces.push_back(incoming[i - n_outgoing]);
        problem.classes.push_back(FlowClass::Incoming);
      }
    }
    validate_problem(problem);
    return problem;
  }
  throw NoConvergenceError(
      "make_stationary_problem: could not balance the mass flux subsonically");
}

JunctionProblem make_mirrored_pair(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> gamma_dist(1.25, 1.75);
  std::uniform_real_distribution<double> cv_dist(0.7, 1.4);
  std::uniform_real_distribution<double> nu_dist(0.5, 2.0);
  std::uniform_real_distribution<double> mach_dist(0.05, 0.55);
  std::uniform_real_distribution<double> rho_dist(0.6, 1.8);
  std::uniform_real_distribution<double> p_dist(0.6, 1.8);

  for (int attempt = 0; attempt < 256; ++attempt) {
    GasParams gas{gamma_dist(rng), cv_dist(rng)};
    const double nu = nu_dist(rng);

    GasState out{rho_dist(rng), 0.0, p_dist(rng)};
    out.u = mach_dist(rng) * sound_speed(out, gas);
    GasState in{rho_dist(rng), 0.0, p_dist(rng)};
    in.u = -mach_dist(rng) * sound_speed(in, gas);

    // The equivalent standard problem: mirrored incoming data on the left.
    StarState star;
    try {
      star = solve_star(mirror(in), out, gas);
    } catch (const Error&) {
      continue;
    }
    const GasState trace{star.rho_left_star, star.u_star, star.p_star};
    if (!(star.u_star > 0.0)) continue;
    if (!(std::abs(star.u_star) < sound_speed(trace, gas))) continue;
    const GasState right_star{star.rho_right_star, star.u_star, star.p_star};
    if (!(std::abs(star.u_star) < sound_speed(right_star, gas))) continue;

    JunctionProblem problem;
    problem.mode = CouplingMode::EntropyMix;
    problem.pipes = {{nu, gas, "east"}, {nu, gas, "west"}};
    problem.traces = {out, in};
    problem.classes = {FlowClass::Outgoing, FlowClass::Incoming};
    return problem;
  }
  throw NoConvergenceError("make_mirrored_pair: no admissible sample found");
}

JacobianAudit audit_jacobian(const CanonicalJunction& junction, double fd_step,
                             bool flip_dtau_h_sign) {
  const int n = junction.size();
  const int n_out = junction.n_out;
  const int d = junction.dim();
  const CouplingParams base = initial_params(junction);

  Mat analytic = coupling_jacobian(junction, base);
  if (flip_dtau_h_sign) {
    // Mutation hook: negate the enthalpy-row tau entries.
    for (int r = 1; r < n; ++r) {
      for (int c = n; c < d; ++c) analytic(r, c) = -analytic(r, c);
    }
  }

  JacobianAudit audit;
  for (int col = 0; col < d; ++col) {
    CouplingParams plus = base;
    CouplingParams minus = base;
    if (col < n) {
      plus.sigma[col] += fd_step;
      minus.sigma[col] -= fd_step;
    } else {
      plus.tau[col - n] += fd_step;
      minus.tau[col - n] -= fd_step;
    }
    const std::vector<double> rp = coupling_residual(junction, plus);
    const std::vector<double> rm = coupling_residual(junction, minus);
    for (int row = 0; row < d; ++row) {
      const double fd = (rp[row] - rm[row]) / (2.0 * fd_step);
      audit.max_abs_deviation =
          std::max(audit.max_abs_deviation, std::abs(analytic(row, col) - fd));
    }
  }

  const BasePointDerivatives deriv = base_point_derivatives(junction);
  bool signs = true;
  for (int i = 0; i < n; ++i) {
    signs = signs && deriv.q_hat_sigma[i] > 0.0 && deriv.h_sigma[i] > 0.0;
  }
  for (int i = 0; i < n_out; ++i) {
    signs = signs && deriv.q_hat_tau[i] > 0.0 && deriv.h_tau[i] < 0.0 &&
            deriv.s_tau[i] < 0.0;
  }
  audit.signs_ok = signs;
  // s_ref - s* vanishes exactly when only one pipe feeds the mix, so the
  // sign statement is checked up to the roundoff of that difference.
  double inflow_abs = 0.0;
  double s_scale = 0.0;
  for (int j = n_out; j < n; ++j) {
    inflow_abs += junction.problem.pipes[j].nu_norm *
                  mass_flux(junction.problem.traces[j]);
    const GasParams& gp = junction.problem.pipes[j].gas;
    s_scale = std::max(s_scale,
                       std::abs(entropy(junction.problem.traces[j], gp)) +
                           gp.gamma * gp.c_v);
  }
  const double s_star_band = 1e-12 * std::abs(deriv.q_hat_sigma[n_out]) *
                             s_scale / std::abs(inflow_abs);
  audit.s_star_sign_ok = deriv.s_star_sigma[0] <= s_star_band;

  using RowMajorMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::MatrixXd J =
      Eigen::Map<const RowMajorMat>(coupling_jacobian(junction, base).data(), d, d);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  audit.min_singular_value = svd.singularValues().minCoeff();
  audit.max_singular_value = svd.singularValues().maxCoeff();
  return audit;
}

PairEquivalence two_pipe_equivalence_check(const JunctionProblem& pair) {
  const GasParams& gas = pair.pipes[0].gas;
  const StarState star = solve_star(mirror(pair.traces[1]), pair.traces[0], gas);
  const StarSolution junction = solve_junction(pair);

  const GasState expect0{star.rho_left_star, star.u_star, star.p_star};
  const GasState expect1{star.rho_left_star, -star.u_star, star.p_star};

  auto dev = [](const GasState& a, const GasState& b) {
    return std::max({std::abs(a.rho - b.rho), std::abs(a.u - b.u),
                     std::abs(a.p - b.p)});
  };
  PairEquivalence check;
  check.star_deviation = std::max(dev(junction.star_states[0], expect0),
                                  dev(junction.star_states[1], expect1));
  return check;
}

VerifyReport run_verification(std::uint64_t seed, int trials) {
  VerifyReport report;
  report.trials = trials;
  if (trials <= 0) {
    report.all_passed = true;
    return report;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_dist(2, 6);

  {
    VerifyCheck check;
    check.name = "jacobian-audit";
    double worst = 0.0;
    bool signs = true;
    double worst_sv_ratio = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
      const int n = n_dist(rng);
      std::uniform_int_distribution<int> out_dist(1, n - 1);
      const JunctionProblem problem =
          make_stationary_problem(rng, n, out_dist(rng), t % 2 == 1);
      const JacobianAudit audit = audit_jacobian(canonicalize(problem), 1e-6);
      worst = std::max(worst, audit.max_abs_deviation);
      signs = signs && audit.signs_ok && audit.s_star_sign_ok;
      worst_sv_ratio = std::min(
          worst_sv_ratio, audit.min_singular_value / audit.max_singular_value);
    }
    check.worst = worst;
    check.passed = worst <= 1e-5 && signs && worst_sv_ratio > 1e-12;
    std::ostringstream os;
    os << "max |analytic - fd| = " << worst << ", signs "
       << (signs ? "ok" : "VIOLATED") << ", min sv ratio " << worst_sv_ratio;
    check.detail = os.str();
    report.checks.push_back(check);
  }

  {
    VerifyCheck check;
    check.name = "det-blocks-negative";
    double max_det = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
      const int n = n_dist(rng);
      std::uniform_int_distribution<int> out_dist(1, n - 1);
      const JunctionProblem problem =
          make_stationary_problem(rng, n, out_dist(rng), t % 2 == 0);
      const CouplingBlocks blocks = coupling_d_matrices(canonicalize(problem));
      for (double det : blocks.determinants) max_det = std::max(max_det, det);
    }
    check.worst = max_det;
    check.passed = max_det < -1e-12;
    std::ostringstream os;
    os << "largest det(D_i) = " << max_det;
    check.detail = os.str();
    report.checks.push_back(check);
  }

  {
    VerifyCheck check;
    check.name = "two-pipe-equivalence";
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      worst = std::max(
          worst, two_pipe_equivalence_check(make_mirrored_pair(rng)).star_deviation);
    }
    check.worst = worst;
    check.passed = worst <= 1e-9;
    std::ostringstream os;
    os << "max star deviation = " << worst;
    check.detail = os.str();
    report.checks.push_back(check);
  }

  {
    VerifyCheck check;
    check.name = "lipschitz-probe";
    const JunctionProblem base = make_stationary_problem(rng, 3, 1, false);
    const int probe_trials = std::max(1, trials / 2);
    bool bounded = true;
    double worst = 0.0;
    for (PerturbationKind kind :
         {PerturbationKind::Traces, PerturbationKind::CrossSections}) {
      double prev = 0.0;
      bool first = true;
      for (double delta : {1e-2, 1e-3, 1e-4}) {
        const LipschitzStats stats =
            lipschitz_probe(base, delta, probe_trials, seed ^ 0x9e3779b9, kind);
        worst = std::max(worst, stats.max_ratio);
        if (!first && stats.max_ratio > 2.0 * prev) bounded = false;
        prev = stats.max_ratio;
        first = false;
      }
    }
    check.worst = worst;
    check.passed = bounded;
    std::ostringstream os;
    os << "max perturbation ratio = " << worst
       << (bounded ? ", stable across delta levels" : ", GROWS across levels");
    check.detail = os.str();
    report.checks.push_back(check);
  }

  report.all_passed = true;
  for (const VerifyCheck& check : report.checks) {
    report.all_passed = report.all_passed && check.passed;
  }
  return report;
}

}  // namespace pipenet
