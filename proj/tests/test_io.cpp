#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coag/io.hpp"

using namespace coag;

namespace {

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("numbers round-trip") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5, 0.0, 123456789.0}) {
    CHECK(std::stod(format_number(x)) == x);
  }
  CHECK(format_number(0.25) == "0.25");
  CHECK(format_number(2.0) == "2");
}

TEST_CASE("histogram json") {
  const auto h = MassHistogram::from_counts(5, {{1, 3}, {2, 1}});
  const nlohmann::json j = h;
  CHECK(j.dump() == R"({"counts":{"1":3,"2":1},"n":5})");
  CHECK(histogram_from_json(j) == h);
}

TEST_CASE("density json") {
  auto d = histogram_to_density(MassHistogram::from_counts(5, {{1, 1}, {4, 1}}), 2);
  const nlohmann::json j = d;
  CHECK(j["L"] == 2);
  CHECK(j["leaked_mass"] == 0.8);
  const auto back = density_from_json(j);
  CHECK(back.values == d.values);
  CHECK(back.leaked_number == d.leaked_number);
  nlohmann::json bad = j;
  bad["L"] = 3;
  CHECK_THROWS_AS(density_from_json(bad), std::invalid_argument);
}

TEST_CASE("kernel json") {
  CHECK(kernel_to_json(Kernel::constant(2.0))["kind"] == "constant");
  const auto j = kernel_to_json(Kernel::capped_brownian(1.0, 5.0));
  CHECK(j["B"] == 5.0);
  CHECK(kernel_to_json(Kernel::lookup_table({1.0}, 1, 0.0))["dim"] == 1);
}

TEST_CASE("trajectory csv layout") {
  SimulationConfig cfg;
  cfg.n = 20;
  cfg.horizon = 1.0;
  cfg.grid = {0.0, 1.0};
  cfg.truncation = 3;
  std::ostringstream os;
  write_trajectory_csv(os, run(cfg));
  const auto text = os.str();
  CHECK(text.rfind("t,ell,pi,M,QV\n0,1,1,0,0\n", 0) == 0);
  CHECK(lines(text) == 1 + 2 * 3);

  cfg.track_martingale = false;
  std::ostringstream plain;
  write_trajectory_csv(plain, run(cfg));
  CHECK(plain.str().find("0,1,1,,\n") != std::string::npos);
}

TEST_CASE("solution and covariance csv layout") {
  DeterministicTrajectory traj;
  traj.times = {0.0, 0.5};
  traj.states = {DensityVector::delta_one(2), DensityVector::delta_one(2)};
  std::ostringstream os;
  write_solution_csv(os, traj);
  CHECK(os.str() == "t,ell,u\n0,1,1\n0,2,0\n0.5,1,1\n0.5,2,0\n");

  std::ostringstream cov;
  write_covariance_csv(cov, {CovarianceMatrix(1.0, Eigen::MatrixXd::Identity(2, 2))});
  CHECK(cov.str() == "t,a,b,sigma\n1,1,1,1\n1,1,2,0\n1,2,2,1\n");
}

TEST_CASE("atomic writes leave no temporary file") {
  const auto dir = std::filesystem::temp_directory_path() / "coag_io_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "sub" / "file.txt";
  atomic_write(path, "first");
  atomic_write_with(path, [](std::ostream& os) { os << "second"; });
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(content == "second");
  CHECK_FALSE(std::filesystem::exists(dir / "sub" / "file.txt.tmp"));
  std::filesystem::remove_all(dir);
}
