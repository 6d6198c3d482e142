#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "coag/rng.hpp"
#include "coag/smoluchowski.hpp"

using namespace coag;
using Catch::Approx;

namespace {

std::vector<double> random_density(RandomStream& rng, std::size_t L) {
  std::vector<double> u(L);
  double mass = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    u[i] = rng.uniform();
    mass += static_cast<double>(i + 1) * u[i];
  }
  for (double& x : u) x /= mass;
  return u;
}

SolverConfig config(double T, std::size_t intervals, double dt) {
  SolverConfig cfg;
  cfg.horizon = T;
  cfg.grid = uniform_grid(T, intervals);
  cfg.dt = dt;
  return cfg;
}

}  // namespace

TEST_CASE("operators on a single monomer class") {
  const auto k = Kernel::constant(1.0);
  const auto d = DensityVector::delta_one(3);
  CHECK(apply_K(k, d) == std::vector<double>{-2.0, 1.0, 0.0});
  CHECK(apply_R(k, d) == std::vector<double>{2.0, -1.0, 0.0});
  CHECK(apply_K(k, DensityVector(4)) == std::vector<double>(4, 0.0));
}

TEST_CASE("correction operator has no half-mass term at odd masses") {
  const auto k = Kernel::capped_brownian(1.0, 10.0);
  std::vector<double> u{0.0, 0.5, 0.1, 0.0, 0.0, 0.0};
  const auto r = apply_R(k, u);
  CHECK(r[2] == Approx(2.0 * k(3, 3) * 0.1));
  CHECK(r[3] == Approx(-k(2, 2) * 0.5));
  CHECK(r[4] == 0.0);
}

TEST_CASE("deterministic operator is Lipschitz in l1") {
  RandomStream rng(21);
  const auto k = Kernel::capped_brownian(1.0, 7.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = 2 + rng.below(30);
    const auto u = random_density(rng, L);
    const auto v = random_density(rng, L);
    const auto ku = apply_K(k, u);
    const auto kv = apply_K(k, v);
    double lhs = 0.0, dist = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      lhs += std::abs(ku[i] - kv[i]);
      dist += std::abs(u[i] - v[i]);
    }
    // Each unit of mass is at most a monomer, so the l1 norms are <= 1.
    REQUIRE(lhs <= 6.0 * k.sup_norm() * dist + 1e-12);
    const auto r = apply_R(k, u);
    double rn = 0.0, un = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      rn += std::abs(r[i]);
      un += u[i];
    }
    REQUIRE(rn <= 3.0 * k.sup_norm() * un + 1e-12);
  }
}

TEST_CASE("closed form for the constant kernel") {
  CHECK(constant_kernel_exact(1, 0.0, 1.0) == 1.0);
  CHECK(constant_kernel_exact(2, 0.0, 1.0) == 0.0);
  CHECK(constant_kernel_exact(2, 1.0, 1.0) == Approx(0.125));
  double mass = 0.0;
  for (mass_t l = 1; l <= 200; ++l) mass += constant_kernel_exact(l, 1.0, 1.0);
  CHECK(mass == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("closed form satisfies the equation") {
  const auto k = Kernel::constant(1.0);
  const std::size_t L = 200;
  for (double t : {0.3, 1.0, 2.5}) {
    const double h = 1e-5;
    const auto u = constant_kernel_density(L, t, 1.0);
    const auto ku = apply_K(k, u);
    for (mass_t l = 1; l <= 20; ++l) {
      const double derivative =
          (constant_kernel_exact(l, t + h, 1.0) - constant_kernel_exact(l, t - h, 1.0)) / (2.0 * h);
      REQUIRE(ku[static_cast<std::size_t>(l - 1)] == Approx(derivative).margin(1e-8));
    }
  }
}

TEST_CASE("zero kernel leaves the initial condition") {
  const auto sol = solve(Kernel::constant(0.0), DensityVector::delta_one(5), config(2.0, 4, 0.1));
  for (const auto& u : sol.states) CHECK(u.values == DensityVector::delta_one(5).values);
}

TEST_CASE("constant kernel solution against the closed form") {
  const std::size_t L = 64;
  const auto sol = solve(Kernel::constant(1.0), DensityVector::delta_one(L), config(2.0, 4, 1e-3));
  for (std::size_t j = 0; j < sol.times.size(); ++j) {
    const double t = sol.times[j];
    const auto& u = sol.states[j];
    double err = 0.0;
    for (mass_t l = 1; l <= static_cast<mass_t>(L); ++l) {
      err += std::abs(u[l] - constant_kernel_exact(l, t, 1.0));
    }
    CHECK(err <= 1e-8);
    CHECK(u.number() + u.leaked_number == Approx(1.0 / (1.0 + t)).epsilon(1e-9));
  }
}

TEST_CASE("adaptive stepping meets its tolerance") {
  SolverConfig cfg = config(2.0, 2, 0.05);
  cfg.atol = 1e-9;
  const auto sol = solve(Kernel::constant(1.0), DensityVector::delta_one(64), cfg);
  for (mass_t l = 1; l <= 10; ++l) {
    CHECK(sol.states.back()[l] == Approx(constant_kernel_exact(l, 2.0, 1.0)).margin(1e-7));
  }
}

TEST_CASE("mass is conserved including the leaked part") {
  const auto sol = solve(Kernel::capped_brownian(1.0, 10.0), DensityVector::delta_one(4), config(3.0, 6, 1e-3));
  double previous_number = 2.0;
  for (const auto& u : sol.states) {
    CHECK(u.mass() + u.leaked_mass == Approx(1.0).epsilon(1e-12));
    const double number = u.number() + u.leaked_number;
    CHECK(number <= previous_number);
    previous_number = number;
    CHECK(u.is_subprobability(1e-9));
  }
}

TEST_CASE("fourth-order convergence") {
  const auto k = Kernel::constant(1.0);
  auto error = [&](double dt) {
    const auto sol = solve(k, DensityVector::delta_one(64), config(1.0, 1, dt));
    double err = 0.0;
    for (mass_t l = 1; l <= 64; ++l) err += std::abs(sol.states.back()[l] - constant_kernel_exact(l, 1.0, 1.0));
    return err;
  };
  const double ratio = error(0.1) / error(0.05);
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("solutions do not depend on the step") {
  const auto k = Kernel::capped_brownian(1.0, 10.0);
  const auto a = solve(k, DensityVector::delta_one(32), config(1.0, 2, 1e-3));
  const auto b = solve(k, DensityVector::delta_one(32), config(1.0, 2, 5e-4));
  for (mass_t l = 1; l <= 32; ++l) CHECK(a.states.back()[l] == Approx(b.states.back()[l]).margin(1e-11));
}

TEST_CASE("interpolation is exact at grid points") {
  const auto sol = solve(Kernel::constant(1.0), DensityVector::delta_one(8), config(1.0, 4, 1e-2));
  CHECK(sol.at(0.5).values == sol.states[2].values);
  const auto mid = sol.at(0.375);
  CHECK(mid[1] == Approx(0.5 * (sol.states[1][1] + sol.states[2][1])));
  CHECK_THROWS_AS(sol.at(1.5), std::out_of_range);
}

TEST_CASE("solver rejects bad configurations") {
  const auto k = Kernel::constant(1.0);
  CHECK_THROWS_AS(solve(k, DensityVector::delta_one(4), config(1.0, 1, 0.2)), std::invalid_argument);
  SolverConfig cfg = config(1.0, 1, 1e-3);
  cfg.grid = {0.5, 2.0};
  CHECK_THROWS_AS(solve(k, DensityVector::delta_one(4), cfg), std::invalid_argument);
  DensityVector bad(2);
  bad.values = {1.0, 1.0};
  CHECK_THROWS_AS(solve(k, bad, config(1.0, 1, 1e-3)), std::invalid_argument);
}
