#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "coag/analysis.hpp"
#include "coag/fluctuation.hpp"
#include "coag/rng.hpp"
#include "coag/smoluchowski.hpp"

using namespace coag;
using Catch::Approx;

namespace {

SimulationConfig small_config(double c) {
  SimulationConfig cfg;
  cfg.n = 100;
  cfg.kernel = Kernel::constant(c);
  cfg.horizon = 1.0;
  cfg.grid = {0.0, 0.5, 1.0};
  cfg.truncation = 6;
  cfg.master_seed = 5;
  return cfg;
}

std::vector<DensityVector> reference(const SimulationConfig& cfg) {
  std::vector<DensityVector> out;
  for (double t : cfg.grid) out.push_back(constant_kernel_density(cfg.truncation, t, cfg.kernel.rate_constant()));
  return out;
}

}  // namespace

TEST_CASE("one-pass moments match two-pass formulas") {
  RandomStream rng(9);
  std::vector<double> x(5000);
  for (double& v : x) v = std::pow(rng.uniform(), 2.0) * 3.0 + 1.0;
  MomentAccumulator acc;
  for (double v : x) acc.add(v);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(x.size());
  CHECK(acc.mean() == Approx(mean).epsilon(1e-12));
  CHECK(acc.variance() == Approx(m2 / (n - 1.0)).epsilon(1e-10));
  CHECK(acc.skewness() == Approx(std::sqrt(n) * m3 / std::pow(m2, 1.5)).epsilon(1e-9));
  CHECK(acc.excess_kurtosis() == Approx(n * m4 / (m2 * m2) - 3.0).epsilon(1e-9));
}

TEST_CASE("degenerate samples") {
  MomentAccumulator acc;
  CHECK(acc.standard_error() == 0.0);
  acc.add(2.0);
  CHECK(acc.variance() == 0.0);
  acc.add(2.0);
  CHECK(acc.skewness() == 0.0);
  CHECK(acc.excess_kurtosis() == 0.0);

  CovarianceAccumulator cov;
  for (double v : {1.0, 2.0, 4.0}) cov.add(v, -2.0 * v);
  CHECK(cov.covariance() == Approx(-2.0 * 7.0 / 3.0));
}

TEST_CASE("a single replica has zero spread") {
  const auto cfg = small_config(1.0);
  const auto s = reduce({run(cfg, 0)}, reference(cfg));
  CHECK(s.replicas == 1);
  for (const auto& ts : s.times) {
    for (const auto& p : ts.pi) CHECK(p.variance == 0.0);
  }
  CHECK(s.times[0].pi[0].mean == 1.0);
  CHECK(s.times[0].xi[0].mean == 0.0);
}

TEST_CASE("reduction is deterministic") {
  const auto cfg = small_config(1.0);
  std::vector<Trajectory> trajs;
  for (std::uint64_t r = 0; r < 50; ++r) trajs.push_back(run(cfg, r));
  const auto a = reduce(trajs, reference(cfg), {{1, 2}});
  const auto b = reduce(trajs, reference(cfg), {{1, 2}});
  nlohmann::json ja, jb;
  for (std::size_t j = 0; j < a.times.size(); ++j) {
    for (std::size_t l = 0; l < cfg.truncation; ++l) {
      REQUIRE(a.times[j].xi[l].variance == b.times[j].xi[l].variance);
      REQUIRE(a.times[j].qv[l].mean == b.times[j].qv[l].mean);
    }
    REQUIRE(a.times[j].covariances[0].covariance == b.times[j].covariances[0].covariance);
  }
}

TEST_CASE("zero kernel fluctuations vanish") {
  const auto cfg = small_config(0.0);
  std::vector<Trajectory> trajs;
  for (std::uint64_t r = 0; r < 10; ++r) trajs.push_back(run(cfg, r));
  const auto s = reduce(trajs, reference(cfg));
  for (const auto& ts : s.times) {
    CHECK(ts.xi_l1_squared.mean == 0.0);
    CHECK(ts.lln_error.mean == 0.0);
    CHECK(ts.max_mass_fluctuation == 0.0);
  }
  std::vector<CovarianceMatrix> zero{{1.0, Eigen::MatrixXd::Zero(6, 6)}};
  CHECK(clt_report(s, zero, {1, 2}).passed());
  CHECK(check_apriori_fluctuation_bounds({s, s}).passed());
}

TEST_CASE("two-particle ensemble mean matches the exact law") {
  SimulationConfig cfg;
  cfg.n = 2;
  cfg.horizon = 1.0;
  cfg.grid = {1.0};
  cfg.truncation = 2;
  cfg.master_seed = 3;
  EnsembleReducer reducer(2, cfg.grid, 2);
  for (std::uint64_t r = 0; r < 100000; ++r) reducer.add(run(cfg, r));
  const auto s = reducer.summary();
  const auto& p = s.times[0].pi[1];
  CHECK(std::abs(2.0 * p.mean - (1.0 - std::exp(-1.0))) <= 3.0 * 2.0 * p.standard_error);
  CHECK(s.times[0].xi.empty());
}

TEST_CASE("mismatched replicas are rejected") {
  auto cfg = small_config(1.0);
  EnsembleReducer reducer(cfg.n, cfg.grid, cfg.truncation);
  reducer.add(run(cfg, 0));
  auto other = cfg;
  other.n = 50;
  CHECK_THROWS_AS(reducer.add(run(other, 1)), std::invalid_argument);
  other = cfg;
  other.grid = {0.0, 1.0};
  CHECK_THROWS_AS(reducer.add(run(other, 1)), std::invalid_argument);
  other = cfg;
  other.track_martingale = false;
  CHECK_THROWS_AS(reducer.add(run(other, 1)), std::invalid_argument);
  CHECK_THROWS_AS(EnsembleReducer(cfg.n, cfg.grid, cfg.truncation, {}, {{1, 7}}), std::invalid_argument);
  CHECK_THROWS_AS(reduce({}), std::invalid_argument);
}

TEST_CASE("moment bound constants") {
  CHECK(moment_constant(2) == 2.0);
  CHECK(moment_constant(3) == 3.0);
  CHECK(moment_constant(4) == Approx(14.0 / 3.0));
  CHECK(moment_bound(2, 1.0, 1.0) == 3.0);
  CHECK(moment_bound(4, 1.0, 0.0) == 1.0);
  CHECK_THROWS_AS(moment_constant(1), std::invalid_argument);
}

TEST_CASE("moment bound checks") {
  const auto cfg = small_config(1.0);
  std::vector<Trajectory> trajs;
  for (std::uint64_t r = 0; r < 200; ++r) trajs.push_back(run(cfg, r));
  auto s = reduce(trajs);
  CHECK(check_moment_bounds(s, cfg.kernel).passed());
  s.times.back().moments[2].mean = 10.0;
  s.times.back().moments[2].standard_error = 0.1;
  const auto r = check_moment_bounds(s, cfg.kernel);
  CHECK(r.failures() == 1);
}

TEST_CASE("clt report flags a wrong variance") {
  const auto cfg = small_config(1.0);
  std::vector<Trajectory> trajs;
  for (std::uint64_t r = 0; r < 400; ++r) trajs.push_back(run(cfg, r));
  const auto s = reduce(trajs, reference(cfg));
  const double observed = s.at(1.0).xi[0].variance;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(6, 6) * observed;
  const auto good = clt_report(s, {{1.0, m}}, {1});
  const auto bad = clt_report(s, {{1.0, 4.0 * m}}, {1});
  auto variance_passed = [](const Report& r) {
    for (const auto& c : r.checks) {
      if (c.name.rfind("variance", 0) == 0) return c.passed;
    }
    return false;
  };
  CHECK(variance_passed(good));
  CHECK_FALSE(variance_passed(bad));
  CHECK(relative_discrepancy(1.1, 1.0) == Approx(0.1));
  CHECK(std::isinf(relative_discrepancy(1.0, 0.0)));
  CHECK(relative_discrepancy(0.0, 0.0) == 0.0);
}

TEST_CASE("a priori bound compares sizes") {
  EnsembleSummary a, b;
  a.n = 100;
  b.n = 400;
  TimeSummary ta, tb;
  ta.time = tb.time = 1.0;
  ta.xi_l1_squared.mean = 1.0;
  tb.xi_l1_squared.mean = 1.5;
  ta.xi_weighted.mean = 1.0;
  tb.xi_weighted.mean = 3.0;
  a.times = {ta};
  b.times = {tb};
  const auto r = check_apriori_fluctuation_bounds({a, b}, 2.0);
  REQUIRE(r.checks.size() == 2);
  CHECK(r.checks[0].passed);
  CHECK_FALSE(r.checks[1].passed);
  CHECK(r.checks[1].observed == 3.0);
}

TEST_CASE("reports serialize") {
  Report r{"demo", {{"a", true, 1.0, 2.0, 0.1, ""}, {"b", false, 3.0, 2.0, 0.0, "x"}}};
  const nlohmann::json j = r;
  CHECK(j["failures"] == 1);
  CHECK(j["passed"] == false);
  CHECK(j["checks"][1]["detail"] == "x");
}
