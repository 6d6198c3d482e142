#include <catch2/catch_amalgamated.hpp>

#include "coag/config.hpp"

using namespace coag;

namespace {

RunConfig parse(const std::string& text, const std::vector<std::string>& overrides = {}) {
  auto root = load_yaml(text, "test.yaml");
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  apply_overrides(root, overrides);
  return parse_config(root, "test.yaml");
}

std::string error_of(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse(text, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults") {
  const auto c = parse("");
  CHECK(c.kernel.kind() == KernelKind::constant);
  CHECK(c.sampler == Sampler::thinning);
  CHECK(c.grid == std::vector<double>{1.0});
}

TEST_CASE("a full document") {
  const auto c = parse(
      "kernel: {kind: capped-brownian, C0: 0.5, B: 4}\n"
      "n: 500\n"
      "T: 2\n"
      "grid_intervals: 4\n"
      "L: 16\n"
      "replicas: 30\n"
      "master_seed: 9\n"
      "sampler: direct\n"
      "solver: {dt: 0.01}\n"
      "covariance_pairs: [[1, 2]]\n"
      "tolerances: {variance_relative: 0.2}\n");
  CHECK(c.kernel.kind() == KernelKind::capped_brownian);
  CHECK(c.kernel.sup_norm() == 4.0);
  CHECK(c.n == 500);
  CHECK(c.grid == std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0});
  CHECK(c.truncation == 16);
  CHECK(c.replicas == 30);
  CHECK(c.sampler == Sampler::direct);
  CHECK(c.dt == 0.01);
  CHECK(c.covariance_pairs == std::vector<std::pair<mass_t, mass_t>>{{1, 2}});
  CHECK(c.tolerances.clt.variance_relative == 0.2);
  CHECK(c.simulation().truncation == 16);
}

TEST_CASE("lookup table kernel") {
  const auto c = parse("kernel: {kind: lookup-table, table: [[1, 2], [2, 0.5]], default: 0.1}\n");
  CHECK(c.kernel(1, 2) == 2.0);
  CHECK(c.kernel(3, 1) == 0.1);
  CHECK(error_of("kernel: {kind: lookup-table, table: [[1, 2], [3, 0.5]]}\n").find("test.yaml:1") == 0);
}

TEST_CASE("errors name the offending line") {
  CHECK(error_of("n: 10\nT: 1\ngrid: [0.5, 2.0]\n").find("test.yaml:3") == 0);
  CHECK(error_of("n: 10\nbogus: 1\n").find("test.yaml:2: unknown key 'bogus'") == 0);
  CHECK(error_of("n: 10\nsolver: {dt: 0.1, order: 4}\n").find("test.yaml:2") == 0);
  CHECK(error_of("kernel: {kind: gaussian}\n").find("unknown kernel kind") != std::string::npos);
  CHECK(error_of("n: ten\n").find("test.yaml:1") == 0);
  CHECK(error_of("n: 0\n").find("test.yaml:1") == 0);
  CHECK_THROWS_AS(load_yaml("n: [1,\n", "broken.yaml"), ConfigError);
}

TEST_CASE("solver step above the stability bound is rejected") {
  CHECK_FALSE(error_of("kernel: {kind: constant, c: 2}\nsolver: {dt: 0.1}\n").empty());
  CHECK(error_of("kernel: {kind: constant, c: 2}\nsolver: {dt: 0.05}\n").empty());
}

TEST_CASE("overrides reach nested keys") {
  const auto c = parse("n: 10\n", {"n=20", "solver.dt=0.002", "kernel.kind=capped-brownian", "kernel.B=3"});
  CHECK(c.n == 20);
  CHECK(c.dt == 0.002);
  CHECK(c.kernel.sup_norm() == 3.0);
  CHECK_THROWS_AS(parse("", {"n"}), ConfigError);
  CHECK_THROWS_AS(parse("n: 5\n", {"n.x=1"}), ConfigError);
}

TEST_CASE("effective config leaves out execution settings") {
  const auto a = parse("n: 10\nthreads: 1\noutput: a\n");
  const auto b = parse("n: 10\nthreads: 8\noutput: b\n");
  const auto c = parse("n: 11\n");
  CHECK(effective_config(a).dump() == effective_config(b).dump());
  CHECK(content_hash(effective_config(a).dump()) == content_hash(effective_config(b).dump()));
  CHECK(content_hash(effective_config(a).dump()) != content_hash(effective_config(c).dump()));
  CHECK(content_hash("") == "cbf29ce484222325");
  CHECK(content_hash("a") == "af63dc4c8601ec8c");
}

TEST_CASE("missing config file") {
  CHECK_THROWS_AS(load_config("/nonexistent/run.yaml"), ConfigError);
}
