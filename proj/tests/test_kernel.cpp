#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "coag/kernel.hpp"
#include "coag/rng.hpp"

using namespace coag;
using Catch::Approx;

TEST_CASE("constant kernel evaluates to its rate") {
  const auto k = Kernel::constant(1.0);
  CHECK(k(1, 2) == 1.0);
  CHECK(k.sup_norm() == 1.0);
  CHECK(Kernel::constant(2.5).sup_norm() == 2.5);
}

TEST_CASE("mass zero never merges") {
  for (const auto& k : {Kernel::constant(3.0), Kernel::capped_brownian(1.0, 10.0),
                        Kernel::lookup_table({3.0}, 1, 0.5)}) {
    CHECK(k(0, 5) == 0.0);
    CHECK(k(5, 0) == 0.0);
    CHECK(k(0, 0) == 0.0);
  }
}

TEST_CASE("capped brownian kernel equals 4 C0 on the diagonal") {
  const auto k = Kernel::capped_brownian(1.0, 100.0);
  for (mass_t l : {1, 8, 27, 1000}) CHECK(k(l, l) == Approx(4.0).epsilon(1e-14));
}

TEST_CASE("capped brownian supremum is the cap") {
  const auto k = Kernel::capped_brownian(1.0, 5.0);
  CHECK(k.sup_norm() == 5.0);
  CHECK(k(1, 2) < 5.0);
  // (1 + m^{1/3})(1 + m^{-1/3}) passes 5 once m^{1/3} > 3.
  CHECK(k(1, 8) == Approx(4.5).epsilon(1e-14));  // (1 + 2)(1 + 1/2)
  CHECK(k(1, 27) == 5.0);                        // uncapped 16/3
  CHECK(k(1, 1000) == 5.0);
  CHECK(Kernel::capped_brownian(0.0, 5.0).sup_norm() == 0.0);
}

TEST_CASE("lookup table supremum includes the default") {
  const auto k = Kernel::lookup_table({3.0}, 1, 0.0);
  CHECK(k.sup_norm() == 3.0);
  CHECK(k(1, 1) == 3.0);
  CHECK(k(1, 2) == 0.0);
  CHECK(Kernel::lookup_table({1.0, 2.0, 2.0, 0.5}, 2, 4.0).sup_norm() == 4.0);
}

TEST_CASE("lookup table rejects bad tables at construction") {
  CHECK_THROWS_AS(Kernel::lookup_table({1.0, 2.0, 3.0, 1.0}, 2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Kernel::lookup_table({1.0, -2.0, -2.0, 1.0}, 2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Kernel::lookup_table({1.0, 2.0, 3.0}, 2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Kernel::lookup_table({1.0}, 1, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(Kernel::constant(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(Kernel::capped_brownian(1.0, std::nan("")), std::invalid_argument);
}

TEST_CASE("symmetry, boundedness and memo agreement on random pairs") {
  RandomStream rng(7);
  const std::vector<Kernel> kernels{Kernel::constant(1.5), Kernel::capped_brownian(0.7, 6.0),
                                    Kernel::lookup_table({1.0, 2.0, 0.5, 2.0, 0.0, 3.0, 0.5, 3.0, 1.0}, 3, 0.25)};
  const std::vector<Kernel> unmemoized{Kernel::constant(1.5, 0), Kernel::capped_brownian(0.7, 6.0, 0),
                                       Kernel::lookup_table({1.0, 2.0, 0.5, 2.0, 0.0, 3.0, 0.5, 3.0, 1.0}, 3, 0.25, 0)};
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    const auto& k = kernels[i];
    for (int trial = 0; trial < 10000; ++trial) {
      const auto l = static_cast<mass_t>(rng.below(600));
      const auto m = static_cast<mass_t>(rng.below(600));
      REQUIRE(k(l, m) == k(m, l));
      REQUIRE(k(l, m) >= 0.0);
      REQUIRE(k(l, m) <= k.sup_norm());
      REQUIRE(k(l, m) == unmemoized[i](l, m));
    }
  }
}
