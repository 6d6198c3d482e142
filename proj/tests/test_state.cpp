#include <catch2/catch_amalgamated.hpp>

#include "coag/rng.hpp"
#include "coag/state.hpp"

using namespace coag;
using Catch::Approx;

TEST_CASE("monodisperse histogram") {
  const auto h = MassHistogram::monodisperse(4);
  CHECK(h.count(1) == 4);
  CHECK(h.particle_count() == 4);
  CHECK(h.total_mass() == 4);
  CHECK(h.max_mass() == 1);
  CHECK(h.sparse() == std::map<mass_t, count_t>{{1, 4}});
  CHECK_THROWS_AS(MassHistogram::monodisperse(0), std::invalid_argument);
}

TEST_CASE("density of small histograms") {
  auto d = histogram_to_density(MassHistogram::from_counts(4, {{1, 2}, {2, 1}}), 3);
  CHECK(d.values == std::vector<double>{0.5, 0.25, 0.0});
  CHECK(d.leaked_number == 0.0);

  d = histogram_to_density(MassHistogram::from_counts(4, {{4, 1}}), 3);
  CHECK(d.values == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(d.leaked_number == 0.25);
  CHECK(d.leaked_mass == 1.0);
}

TEST_CASE("from_counts validates total mass and ranges") {
  CHECK_THROWS_AS(MassHistogram::from_counts(4, {{1, 3}}), std::invalid_argument);
  CHECK_THROWS_AS(MassHistogram::from_counts(4, {{5, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(MassHistogram::from_counts(4, {{1, 6}, {2, -1}}), std::invalid_argument);
  CHECK_THROWS_AS(MassHistogram::from_counts(4, {{0, 1}, {1, 4}}), std::invalid_argument);
}

TEST_CASE("merge keeps mass and drops one particle") {
  auto h = MassHistogram::monodisperse(6);
  h.merge(1, 1);
  h.merge(2, 1);
  h.merge(1, 1);
  CHECK(h.sparse() == std::map<mass_t, count_t>{{1, 1}, {2, 1}, {3, 1}});
  CHECK(h.particle_count() == 3);
  CHECK(h.total_mass() == 6);
  CHECK(h.max_mass() == 3);
  CHECK_THROWS_AS(h.merge(2, 2), std::logic_error);
  CHECK_THROWS_AS(h.merge(4, 1), std::logic_error);
  CHECK_THROWS_AS(h.merge(0, 1), std::logic_error);
}

TEST_CASE("random merge sequences preserve the invariants") {
  RandomStream rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const mass_t n = 1 + static_cast<mass_t>(rng.below(60));
    auto h = MassHistogram::monodisperse(n);
    while (h.particle_count() > 1) {
      std::vector<mass_t> parts;
      for (auto [m, c] : h.sparse()) parts.insert(parts.end(), static_cast<std::size_t>(c), m);
      const auto i = rng.below(parts.size());
      auto j = rng.below(parts.size() - 1);
      if (j >= i) ++j;
      const auto before = h.particle_count();
      h.merge(parts[i], parts[j]);
      REQUIRE(h.total_mass() == n);
      REQUIRE(h.particle_count() == before - 1);
      const auto d = histogram_to_density(h, 8);
      REQUIRE(d.is_subprobability());
      REQUIRE(d.mass() + d.leaked_mass == Approx(1.0));
      REQUIRE(d.number() + d.leaked_number == Approx(static_cast<double>(h.particle_count()) / n));
      for (auto [m, c] : h.sparse()) REQUIRE(c > 0);
    }
    CHECK(h.max_mass() == n);
  }
}

TEST_CASE("moments over the full histogram") {
  const auto h = MassHistogram::from_counts(10, {{1, 2}, {4, 2}});
  CHECK(h.moment(0) == Approx(0.4));
  CHECK(h.moment(1) == Approx(1.0));
  CHECK(h.moment(2) == Approx((2.0 + 32.0) / 10.0));
}

TEST_CASE("fluctuation scales by root n") {
  const auto pi = histogram_to_density(MassHistogram::from_counts(4, {{1, 2}, {2, 1}}), 2);
  DensityVector u(2);
  u.values = {0.25, 0.25};
  const auto xi = fluctuation(pi, u, 4);
  CHECK(xi.values[0] == Approx(0.5));
  CHECK(xi.values[1] == Approx(0.0).margin(1e-15));

  // Same density at 4n gives twice the fluctuation.
  const auto pi4 = histogram_to_density(MassHistogram::from_counts(16, {{1, 8}, {2, 4}}), 2);
  CHECK(fluctuation(pi4, u, 16).values[0] == Approx(2.0 * xi.values[0]));
  CHECK_THROWS_AS(fluctuation(pi, DensityVector(3), 4), std::invalid_argument);
}

TEST_CASE("norms") {
  const std::vector<double> v{1.0, -2.0, 0.5};
  CHECK(norm_l1(v) == 3.5);
  CHECK(norm_l1_weighted(v) == Approx(1.0 + 4.0 + 1.5));
  CHECK(norm_sup(v) == 2.0);
  CHECK(norm_l1(std::vector<double>{}) == 0.0);
}

TEST_CASE("clamping tiny negatives") {
  DensityVector d(3);
  d.values = {0.5, -1e-14, 0.2};
  CHECK(d.clamp_negatives());
  CHECK(d.values[1] == 0.0);
  d.values[2] = -1e-3;
  CHECK_FALSE(d.clamp_negatives());
}
