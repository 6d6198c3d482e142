#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "coag/analysis.hpp"
#include "coag/oracle.hpp"
#include "coag/simulator.hpp"

using namespace coag;
using Catch::Approx;

TEST_CASE("partition counts and order") {
  CHECK(partitions(1).size() == 1);
  CHECK(partitions(5).size() == 7);
  CHECK(partitions(12).size() == 77);
  const auto p = partitions(4);
  CHECK(p.front() == Partition{1, 1, 1, 1});
  CHECK(p.back() == Partition{4});
  for (const auto& part : partitions(9)) {
    mass_t sum = 0;
    for (mass_t x : part) sum += x;
    REQUIRE(sum == 9);
    REQUIRE(std::is_sorted(part.begin(), part.end(), std::greater<>()));
  }
}

TEST_CASE("generator for two and three particles") {
  const auto k = Kernel::constant(1.0);
  const PartitionChain two(2, k);
  REQUIRE(two.size() == 2);
  CHECK(two.rate(0, 0) == Approx(-1.0));
  CHECK(two.rate(0, 1) == Approx(1.0));
  CHECK(two.rate(1, 0) == 0.0);
  CHECK(two.rate(1, 1) == 0.0);

  const PartitionChain three(3, k);
  const auto mono = three.index_of({1, 1, 1});
  const auto mixed = three.index_of({1, 2});
  const auto single = three.index_of({3});
  CHECK(three.rate(mono, mixed) == Approx(2.0));
  CHECK(three.rate(mixed, single) == Approx(2.0 / 3.0));
  CHECK(three.rate(mono, single) == 0.0);
}

TEST_CASE("generator rows sum to zero and only coarsen") {
  const PartitionChain chain(8, Kernel::capped_brownian(1.0, 10.0));
  for (std::size_t s = 0; s < chain.size(); ++s) {
    double sum = 0.0;
    for (std::size_t t = 0; t < chain.size(); ++t) {
      sum += chain.rate(s, t);
      if (t != s && chain.rate(s, t) > 0.0) REQUIRE(chain.state(t).size() + 1 == chain.state(s).size());
    }
    REQUIRE(sum == Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("zero kernel has a zero generator") {
  const PartitionChain chain(5, Kernel::constant(0.0));
  for (std::size_t s = 0; s < chain.size(); ++s) {
    for (std::size_t t = 0; t < chain.size(); ++t) CHECK(chain.rate(s, t) == 0.0);
  }
  CHECK(chain.distribution(3.0)[0] == 1.0);
}

TEST_CASE("two monomers") {
  const PartitionChain chain(2, Kernel::constant(1.0));
  CHECK(chain.expectation(0.0, observable::count(2)) == 0.0);
  CHECK(chain.expectation(1.0, observable::count(2)) == Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));
  CHECK(chain.expectation(1.0, observable::count(2)) == Approx(0.6321206).epsilon(1e-7));
}

TEST_CASE("three monomers against the hand-solved chain") {
  // 111 -> 21 at rate 2, 21 -> 3 at rate 2/3.
  const PartitionChain chain(3, Kernel::constant(1.0));
  for (double t : {0.1, 0.7, 2.0, 5.0}) {
    const double p111 = std::exp(-2.0 * t);
    const double p21 = 1.5 * (std::exp(-2.0 * t / 3.0) - std::exp(-2.0 * t));
    CHECK(chain.expectation(t, observable::count(1)) == Approx(3.0 * p111 + p21).epsilon(1e-10));
    CHECK(chain.expectation(t, observable::count(3)) == Approx(1.0 - p111 - p21).epsilon(1e-10));
  }
}

TEST_CASE("distributions are probability vectors that conserve mass") {
  const PartitionChain chain(10, Kernel::capped_brownian(1.0, 10.0));
  for (double t : {0.1, 1.0, 10.0}) {
    const auto p = chain.distribution(t);
    double sum = 0.0;
    for (double x : p) {
      REQUIRE(x >= -1e-14);
      sum += x;
    }
    CHECK(sum == Approx(1.0).epsilon(1e-12));
    CHECK(chain.expectation(t, observable::moment(1)) == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("simulated small system matches the exact law") {
  const auto k = Kernel::capped_brownian(1.0, 10.0);
  const PartitionChain chain(4, k);
  SimulationConfig cfg;
  cfg.n = 4;
  cfg.kernel = k;
  cfg.horizon = 0.5;
  cfg.grid = {0.5};
  cfg.truncation = 4;
  cfg.master_seed = 13;
  cfg.track_martingale = false;
  std::vector<MomentAccumulator> acc(4);
  for (std::uint64_t r = 0; r < 100000; ++r) {
    const auto traj = run(cfg, r);
    for (std::size_t l = 0; l < 4; ++l) acc[l].add(traj.snapshots[0].density.values[l]);
  }
  for (mass_t l = 1; l <= 4; ++l) {
    const double exact = chain.expectation(0.5, observable::density(l));
    const auto& a = acc[static_cast<std::size_t>(l - 1)];
    CHECK(std::abs(a.mean() - exact) <= 4.0 * a.standard_error() + 1e-12);
  }
}

TEST_CASE("oracle size limits") {
  CHECK_THROWS_AS(PartitionChain(13, Kernel::constant(1.0)), std::invalid_argument);
  CHECK_THROWS_AS(PartitionChain(0, Kernel::constant(1.0)), std::invalid_argument);
  CHECK_THROWS_AS(PartitionChain(3, Kernel::constant(1.0)).distribution(-1.0), std::invalid_argument);
}
