#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pipenet/riemann.hpp"
#include "pipenet/verify.hpp"
#include "support/oracles.hpp"

using namespace pipenet;

namespace {
const GasParams kAir{1.4, 1.0};
const GasState kSodLeft{1.0, 0.0, 1.0};
const GasState kSodRight{0.125, 0.0, 0.1};
}  // namespace

TEST_CASE("psi vanishes at the base pressure and is strictly increasing") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const GasState s = random_subsonic_state(rng, kAir);
    CHECK(psi(s.p, s, kAir) == 0.0);
  }
  std::uniform_real_distribution<double> p_dist(0.01, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const GasState s = random_subsonic_state(rng, kAir);
    double pa = p_dist(rng), pb = p_dist(rng);
    if (pa == pb) continue;
    if (pa > pb) std::swap(pa, pb);
    CHECK(psi(pa, s, kAir) < psi(pb, s, kAir));
  }
}

TEST_CASE("psi against the Sod bisection oracle") {
  const oracle::StarRef star =
      oracle::star_by_bisection(kSodLeft, kSodRight, kAir.gamma);
  // Classic values of the Sod problem.
  CHECK(star.p == doctest::Approx(0.30313).epsilon(2e-5));
  CHECK(star.u == doctest::Approx(0.92745).epsilon(2e-5));
  // u* = u_L - psi(p*, U_L) for the left state.
  CHECK(kSodLeft.u - psi(star.p, kSodLeft, kAir) ==
        doctest::Approx(star.u).epsilon(1e-12));
}

TEST_CASE("psi domain error") {
  CHECK_THROWS_AS(psi(-1.0, kSodLeft, kAir), InvalidStateError);
  CHECK_THROWS_AS(phi(0.0, kSodLeft, kAir), InvalidStateError);
}

TEST_CASE("phi base point, shock limit and rarefaction isentropy") {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 100; ++i) {
    const GasState s = random_subsonic_state(rng, kAir);
    CHECK(phi(s.p, s, kAir) == s.rho);
  }
  // Strong-shock limit rho -> rho / mu^2.
  const GasState s{1.3, 0.2, 0.7};
  const double limit = s.rho / kAir.mu_sq();
  CHECK(std::abs(phi(1e9 * s.p, s, kAir) - limit) <= 1e-4 * limit);
  // Rarefaction branch preserves the entropy.
  for (double ratio : {0.9, 0.5, 0.1, 0.01}) {
    const double p_star = ratio * s.p;
    const GasState rarefied{phi(p_star, s, kAir), 0.0, p_star};
    CHECK(std::abs(entropy(rarefied, kAir) - entropy(s, kAir)) <= 1e-10);
  }
}

TEST_CASE("solve_star on identical states returns them unchanged") {
  const GasState s{1.7, 0.3, 2.1};
  const StarState star = solve_star(s, s, kAir);
  CHECK(star.p_star == s.p);
  CHECK(star.u_star == s.u);
  CHECK(star.rho_left_star == s.rho);
  CHECK(star.rho_right_star == s.rho);
}

TEST_CASE("solve_star matches the bisection oracle on Sod") {
  const StarState star = solve_star(kSodLeft, kSodRight, kAir);
  const oracle::StarRef ref =
      oracle::star_by_bisection(kSodLeft, kSodRight, kAir.gamma);
  CHECK(std::abs(star.p_star - ref.p) <= 1e-10 * ref.p);
  CHECK(std::abs(star.u_star - ref.u) <= 1e-10);
  CHECK(std::abs(star.rho_left_star - ref.rho_left) <= 1e-10);
  CHECK(std::abs(star.rho_right_star - ref.rho_right) <= 1e-10);
}

TEST_CASE("symmetric collision gives u* = 0 and a double shock") {
  const GasState left{1.0, 0.4, 1.0};
  const GasState right{1.0, -0.4, 1.0};
  const StarState star = solve_star(left, right, kAir);
  CHECK(star.u_star == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(star.p_star > 1.0);
  CHECK(star.rho_left_star == star.rho_right_star);
}

TEST_CASE("vacuum condition is rejected") {
  // 2 (c_L + c_R) / (gamma - 1) is about 11.8 here; 12 exceeds it.
  const GasState left{1.0, -6.0, 1.0};
  const GasState right{1.0, 6.0, 1.0};
  CHECK_THROWS_AS(solve_star(left, right, kAir), VacuumError);
}

TEST_CASE("lax curves pass through their base points") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 50; ++i) {
    const GasState s = random_subsonic_state(rng, kAir);
    const GasState l1 = lax1(s.p, s, kAir);
    CHECK(l1.rho == s.rho);
    CHECK(l1.u == s.u);
    CHECK(l1.p == s.p);
    const GasState l3 = lax3(s.p, s, kAir);
    CHECK(l3.rho == s.rho);
    CHECK(l3.u == s.u);
    CHECK(l3.p == s.p);
    const GasState l2 = lax2(0.0, s, kAir);
    CHECK(l2.rho == s.rho);
    CHECK(l2.u == s.u);
    CHECK(l2.p == s.p);
  }
}

TEST_CASE("lax1 pressure is the parameter and rarefactions are isentropic") {
  const GasState s{1.2, 0.1, 1.5};
  for (double sigma : {0.3, 0.8, 1.2, 2.0, 5.0}) {
    CHECK(lax1(sigma, s, kAir).p == sigma);
  }
  for (double sigma : {0.2, 0.6, 1.0}) {
    const GasState on_curve = lax1(sigma, s, kAir);
    CHECK(std::abs(entropy(on_curve, kAir) - entropy(s, kAir)) <= 1e-10);
  }
}

TEST_CASE("lax3 velocity increases with sigma and matches solve_star") {
  const GasState right{0.8, -0.2, 0.9};
  double prev = lax3(0.05, right, kAir).u;
  for (double sigma = 0.1; sigma < 4.0; sigma += 0.1) {
    const double u = lax3(sigma, right, kAir).u;
    CHECK(u > prev);
    prev = u;
  }
  const GasState left{1.4, 0.5, 1.8};
  const StarState star = solve_star(left, right, kAir);
  CHECK(lax3(star.p_star, right, kAir).u ==
        doctest::Approx(star.u_star).epsilon(1e-11));
}

TEST_CASE("lax2 keeps pressure and velocity, shifts density and entropy") {
  const GasState base{1.1, 0.7, 2.3};
  for (double tau : {-0.5, -0.1, 0.2, 0.9}) {
    const GasState moved = lax2(tau, base, kAir);
    CHECK(moved.u == base.u);
    CHECK(moved.p == base.p);
    CHECK(moved.rho == base.rho + tau);
    const double expected =
        kAir.c_v * std::log(base.p / std::pow(base.rho + tau, kAir.gamma));
    CHECK(std::abs(entropy(moved, kAir) - expected) <= 1e-12);
  }
  CHECK_THROWS_AS(lax2(-base.rho, base, kAir), InvalidStateError);
}

TEST_CASE("wave fan sampling hits the outer states and the Sod oracle") {
  const WaveFan fan = build_wave_fan(kSodLeft, kSodRight, kAir);
  CHECK(fan.wave1.type == WaveType::Rarefaction);
  CHECK(fan.wave2.type == WaveType::Contact);
  CHECK(fan.wave3.type == WaveType::Shock);

  const GasState far_left = sample_wave_fan(fan, fan.wave1.head - 0.1, kAir);
  CHECK(far_left.rho == kSodLeft.rho);
  CHECK(far_left.p == kSodLeft.p);
  const GasState far_right = sample_wave_fan(fan, fan.wave3.tail + 0.1, kAir);
  CHECK(far_right.rho == kSodRight.rho);
  CHECK(far_right.p == kSodRight.p);

  for (double xi : {-0.5, -0.1, 0.0, 0.3, 0.9, 1.2, 1.9}) {
    const GasState got = sample_wave_fan(fan, xi, kAir);
    const GasState want =
        oracle::exact_sample(kSodLeft, kSodRight, kAir.gamma, xi);
    CHECK(std::abs(got.rho - want.rho) <= 1e-10);
    CHECK(std::abs(got.u - want.u) <= 1e-10);
    CHECK(std::abs(got.p - want.p) <= 1e-10);
  }
}

TEST_CASE("star pressure equation is strictly increasing on random pairs") {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 1000; ++i) {
    const GasState l = random_subsonic_state(rng, kAir);
    const GasState r = random_subsonic_state(rng, kAir);
    auto g = [&](double p) {
      return psi(p, l, kAir) + psi(p, r, kAir) + r.u - l.u;
    };
    double prev = g(0.05);
    for (double p = 0.35; p < 6.0; p += 0.3) {
      const double cur = g(p);
      CHECK(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("Rankine-Hugoniot holds across every sampled shock") {
  std::mt19937_64 rng(41);
  int shocks_seen = 0;
  for (int i = 0; i < 400 || shocks_seen < 50; ++i) {
    REQUIRE(i < 4000);
    const GasState l = random_subsonic_state(rng, kAir);
    const GasState r = random_subsonic_state(rng, kAir);
    WaveFan fan;
    try {
      fan = build_wave_fan(l, r, kAir);
    } catch (const VacuumError&) {
      continue;
    }
    auto check_rh = [&](const GasState& a, const GasState& b, double speed) {
      const Vec3 ua = primitive_to_conservative(a, kAir);
      const Vec3 ub = primitive_to_conservative(b, kAir);
      const Vec3 fa = physical_flux(a, kAir);
      const Vec3 fb = physical_flux(b, kAir);
      double scale = 0.0;
      for (int c = 0; c < 3; ++c) {
        scale = std::max({scale, std::abs(fa[c]), std::abs(fb[c]),
                          std::abs(speed * ua[c]), 1.0});
      }
      for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(speed * (ub[c] - ua[c]) - (fb[c] - fa[c])) <=
              1e-9 * scale);
      }
    };
    if (fan.wave1.type == WaveType::Shock) {
      ++shocks_seen;
      check_rh(l, {fan.star.rho_left_star, fan.star.u_star, fan.star.p_star},
               fan.wave1.head);
      // Downstream (star side) entropy exceeds upstream entropy.
      CHECK(entropy({fan.star.rho_left_star, fan.star.u_star, fan.star.p_star},
                    kAir) > entropy(l, kAir));
    }
    if (fan.wave3.type == WaveType::Shock) {
      ++shocks_seen;
      check_rh({fan.star.rho_right_star, fan.star.u_star, fan.star.p_star}, r,
               fan.wave3.head);
      CHECK(entropy({fan.star.rho_right_star, fan.star.u_star, fan.star.p_star},
                    kAir) > entropy(r, kAir));
    }
  }
}

TEST_CASE("psi and phi are twice continuously differentiable at p = p_k") {
  const GasState s{1.2, 0.0, 0.9};
  auto one_sided = [&](auto f, double h) {
    const double right1 = (f(s.p + h) - f(s.p)) / h;
    const double left1 = (f(s.p) - f(s.p - h)) / h;
    const double right2 = (f(s.p + 2 * h) - 2 * f(s.p + h) + f(s.p)) / (h * h);
    const double left2 = (f(s.p) - 2 * f(s.p - h) + f(s.p - 2 * h)) / (h * h);
    return std::array<double, 2>{std::abs(right1 - left1),
                                 std::abs(right2 - left2)};
  };
  auto psi_f = [&](double p) { return psi(p, s, kAir); };
  auto phi_f = [&](double p) { return phi(p, s, kAir); };
  const double eps = 2.3e-16;
  for (double h : {1e-4, 1e-5, 1e-6}) {
    // First differences agree to O(h) plus the eps/h differencing noise;
    // second differences carry an eps/h^2 noise floor.
    const double tol1 = 10.0 * (h + eps / h);
    const double tol2 = 10.0 * (h + eps / (h * h));
    const auto dpsi = one_sided(psi_f, h);
    CHECK(dpsi[0] <= tol1);
    CHECK(dpsi[1] <= tol2);
    const auto dphi = one_sided(phi_f, h);
    CHECK(dphi[0] <= tol1);
    CHECK(dphi[1] <= tol2);
  }
}

TEST_CASE("analytic psi/phi derivatives match central differences") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> p_dist(0.2, 4.0);
  for (int i = 0; i < 300; ++i) {
    const GasState s = random_subsonic_state(rng, kAir);
    const double p = p_dist(rng);
    if (std::abs(p - s.p) < 1e-3) continue;  // keep away from the branch point
    const double h = 1e-7 * p;
    const double fd_psi =
        (psi(p + h, s, kAir) - psi(p - h, s, kAir)) / (2.0 * h);
    CHECK(std::abs(psi_dp(p, s, kAir) - fd_psi) <=
          1e-6 * std::max(1.0, std::abs(fd_psi)));
    const double fd_phi =
        (phi(p + h, s, kAir) - phi(p - h, s, kAir)) / (2.0 * h);
    CHECK(std::abs(phi_dp(p, s, kAir) - fd_phi) <=
          1e-6 * std::max(1.0, std::abs(fd_phi)));
  }
}

TEST_CASE("solve_star agrees with the oracle on random subsonic pairs") {
  std::mt19937_64 rng(47);
  int solved = 0;
  while (solved < 300) {
    const GasState l = random_subsonic_state(rng, kAir);
    const GasState r = random_subsonic_state(rng, kAir);
    StarState star;
    try {
      star = solve_star(l, r, kAir);
    } catch (const VacuumError&) {
      continue;
    }
    const oracle::StarRef ref = oracle::star_by_bisection(l, r, kAir.gamma);
    CHECK(std::abs(star.p_star - ref.p) <= 1e-10 * ref.p);
    CHECK(std::abs(star.u_star - ref.u) <= 1e-10 * std::max(1.0, std::abs(ref.u)));
    ++solved;
  }
}
