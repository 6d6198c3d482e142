// coaglab: command-line front end for simulation, deterministic solves,
// fluctuation predictions, oracle comparison and the acceptance suite.
//
// Exit codes: 0 pass, 1 usage or config error, 2 validation failure,
// 3 internal error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coag/analysis.hpp"
#include "coag/config.hpp"
#include "coag/ensemble.hpp"
#include "coag/fluctuation.hpp"
#include "coag/io.hpp"
#include "coag/oracle.hpp"
#include "coag/smoluchowski.hpp"
#include "coag/validation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_pass = 0;
constexpr int exit_config = 1;
constexpr int exit_failed = 2;
constexpr int exit_internal = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<coag::mass_t> n;
  std::optional<std::uint64_t> replicas;
  std::optional<std::string> sampler;
  std::vector<std::string> set;
  bool apriori = false;
};

coag::RunConfig effective(const Options& o) {
  std::vector<std::string> overrides = o.set;
  if (o.seed) overrides.push_back("master_seed=" + std::to_string(*o.seed));
  if (o.n) overrides.push_back("n=" + std::to_string(*o.n));
  if (o.replicas) overrides.push_back("replicas=" + std::to_string(*o.replicas));
  if (o.sampler) overrides.push_back("sampler=" + *o.sampler);
  auto cfg = coag::load_config(o.config, overrides);
  if (o.out) cfg.output = *o.out;
  if (o.threads) cfg.threads = *o.threads;
  return cfg;
}

/// Output directory out/<command>-<hash>/ with an INCOMPLETE sentinel that
/// is removed only once every file is in place.
class RunDirectory {
 public:
  RunDirectory(const coag::RunConfig& cfg, const std::string& command, json extra = json::object())
      : config_(coag::effective_config(cfg)), command_(command), extra_(std::move(extra)) {
    json id = {{"command", command}, {"config", config_}, {"extra", extra_}};
    run_id_ = command + "-" + coag::content_hash(id.dump());
    root_ = fs::path(cfg.output) / run_id_;
    fs::create_directories(root_);
    coag::atomic_write(root_ / "INCOMPLETE", "run in progress or interrupted\n");
  }

  const fs::path& root() const { return root_; }

  void write(const fs::path& relative, const std::string& content) {
    coag::atomic_write(root_ / relative, content);
    files_.push_back(relative.generic_string());
  }

  template <class Writer>
  void write_with(const fs::path& relative, Writer&& writer) {
    coag::atomic_write_with(root_ / relative, std::forward<Writer>(writer));
    files_.push_back(relative.generic_string());
  }

  void finish(json details = json::object()) {
    json manifest = {{"run_id", run_id_},
                     {"command", command_},
                     {"code_version", coag::version},
                     {"config", config_},
                     {"seed", config_.at("master_seed")},
                     {"n", config_.at("n")},
                     {"kernel", config_.at("kernel")},
                     {"L", config_.at("L")},
                     {"T", config_.at("T")},
                     {"grid", config_.at("grid")},
                     {"strategy", config_.at("sampler")},
                     {"files", files_}};
    if (!extra_.empty()) manifest["arguments"] = extra_;
    for (auto& [k, v] : details.items()) manifest[k] = v;
    coag::atomic_write(root_ / "manifest.json", manifest.dump(2) + "\n");
    fs::remove(root_ / "INCOMPLETE");
    std::cerr << "wrote " << root_.string() << "\n";
  }

 private:
  json config_;
  std::string command_;
  json extra_;
  std::string run_id_;
  fs::path root_;
  std::vector<std::string> files_;
};

coag::DeterministicTrajectory reference_solution(const coag::RunConfig& cfg) {
  return coag::solve(cfg.kernel, coag::DensityVector::delta_one(cfg.truncation), cfg.solver());
}

// Fine deterministic trajectory whose spacing is half the fluctuation step,
// so every Runge-Kutta stage of the fluctuation solvers lands on a grid point.
coag::DeterministicTrajectory fine_solution(const coag::RunConfig& cfg) {
  coag::SolverConfig s;
  s.horizon = cfg.horizon;
  const double spacing = cfg.fluctuation_step / 2.0;
  const auto intervals = static_cast<std::size_t>(std::max<long long>(1, std::llround(cfg.horizon / spacing)));
  s.grid = coag::uniform_grid(cfg.horizon, intervals);
  s.dt = std::min({cfg.dt, spacing, coag::SolverConfig::stability_bound(cfg.kernel)});
  s.atol = cfg.atol;
  return coag::solve(cfg.kernel, coag::DensityVector::delta_one(cfg.truncation), s);
}

std::vector<coag::DensityVector> reference_at_grid(const coag::RunConfig& cfg) {
  return reference_solution(cfg).states;
}

int cmd_simulate(const coag::RunConfig& cfg) {
  RunDirectory dir(cfg, "simulate");
  const auto sim = cfg.simulation();
  coag::EnsembleReducer reducer(cfg.n, cfg.grid, cfg.truncation, reference_at_grid(cfg), cfg.covariance_pairs);
  const unsigned threads = cfg.threads == 0 ? coag::default_thread_count(cfg.replicas) : cfg.threads;
  const int width = static_cast<int>(std::to_string(cfg.replicas - 1).size());
  coag::run_replicas<coag::Trajectory>(
      cfg.replicas, threads, [&](std::uint64_t r) { return coag::run(sim, r); },
      [&](std::uint64_t r, coag::Trajectory&& t) {
        char name[64];
        std::snprintf(name, sizeof name, "trajectories/replica_%0*llu.csv", width, static_cast<unsigned long long>(r));
        dir.write_with(name, [&](std::ostream& os) { coag::write_trajectory_csv(os, t); });
        reducer.add(t);
      });
  const auto summary = reducer.summary();
  dir.write_with("summary.csv", [&](std::ostream& os) { coag::write_summary_csv(os, summary); });
  const auto report = coag::check_moment_bounds(summary, cfg.kernel, cfg.tolerances.moment_standard_errors);
  dir.write("report.json", json(report).dump(2) + "\n");
  dir.finish({{"replicas", cfg.replicas}});
  return exit_pass;
}

int cmd_solve(const coag::RunConfig& cfg) {
  RunDirectory dir(cfg, "solve");
  const auto traj = reference_solution(cfg);
  dir.write_with("solution.csv", [&](std::ostream& os) { coag::write_solution_csv(os, traj); });
  dir.write("final_state.json", json(traj.states.back()).dump(2) + "\n");
  dir.finish({{"solver", {{"L", cfg.truncation}, {"dt", cfg.dt}, {"atol", cfg.atol}, {"steps", traj.steps},
                          {"leaked_mass_at_T", traj.states.back().leaked_mass}}}});
  return exit_pass;
}

int cmd_fluct_predict(const coag::RunConfig& cfg) {
  RunDirectory dir(cfg, "fluct-predict");
  const auto u_traj = fine_solution(cfg);
  const coag::FluctuationConfig fc{cfg.fluctuation_step};
  const auto sigmas = coag::covariance_lyapunov(cfg.kernel, u_traj, cfg.grid, fc);
  dir.write_with("covariance.csv", [&](std::ostream& os) { coag::write_covariance_csv(os, sigmas); });

  coag::Report report{"route cross-check", {}};
  json summary = json::array();
  for (std::size_t gi = 0; gi < cfg.functionals.size(); ++gi) {
    const auto g = coag::indicator(cfg.functionals[gi]);
    std::vector<double> gl(cfg.truncation, 0.0);
    std::copy(g.begin(), g.end(), gl.begin());
    for (const auto& sigma : sigmas) {
      const double t = sigma.time;
      const auto dual = coag::dual_solve(cfg.kernel, g, t, u_traj, cfg.dual_truncation, fc);
      const double lyap = sigma.quadratic(gl);
      const double rel = coag::detail::relative(dual.variance, lyap);
      char name[64];
      std::snprintf(name, sizeof name, "dual/g%zu_t%s.csv", gi, coag::format_number(t).c_str());
      dir.write_with(name, [&](std::ostream& os) { coag::write_dual_csv(os, dual); });
      summary.push_back({{"g_support", cfg.functionals[gi]},
                         {"t", t},
                         {"variance_dual", dual.variance},
                         {"variance_lyapunov", lyap},
                         {"relative_discrepancy", rel}});
      report.checks.push_back({"g" + std::to_string(gi) + " t=" + coag::format_number(t),
                               rel <= cfg.tolerances.route_relative, rel, cfg.tolerances.route_relative, 0.0, ""});
    }
  }
  dir.write("dual_summary.json", summary.dump(2) + "\n");
  dir.write("report.json", json(report).dump(2) + "\n");
  dir.finish();
  for (const auto& c : report.checks) {
    if (!c.passed) std::cerr << "route discrepancy " << c.name << ": " << c.observed << "\n";
  }
  return report.passed() ? exit_pass : exit_failed;
}

coag::EnsembleSummary ensemble(const coag::RunConfig& cfg, coag::mass_t n, const std::vector<coag::DensityVector>& ref) {
  auto sim = cfg.simulation();
  sim.n = n;
  coag::EnsembleReducer reducer(n, cfg.grid, cfg.truncation, ref, cfg.covariance_pairs);
  const unsigned threads = cfg.threads == 0 ? coag::default_thread_count(cfg.replicas) : cfg.threads;
  coag::run_replicas<coag::Trajectory>(
      cfg.replicas, threads, [&](std::uint64_t r) { return coag::run(sim, r); },
      [&](std::uint64_t, coag::Trajectory&& t) { reducer.add(t); });
  return reducer.summary();
}

int cmd_fluct_empirical(const coag::RunConfig& cfg, bool apriori) {
  RunDirectory dir(cfg, "fluct-empirical", {{"apriori", apriori}});
  const auto u_traj = fine_solution(cfg);
  std::vector<coag::DensityVector> ref;
  for (double t : cfg.grid) ref.push_back(u_traj.at(t));
  const auto sigmas = coag::covariance_lyapunov(cfg.kernel, u_traj, cfg.grid, {cfg.fluctuation_step});
  const auto summary = ensemble(cfg, cfg.n, ref);
  dir.write_with("summary.csv", [&](std::ostream& os) { coag::write_summary_csv(os, summary); });
  dir.write_with("covariance.csv", [&](std::ostream& os) { coag::write_covariance_csv(os, sigmas); });
  coag::Report report = coag::clt_report(summary, sigmas, cfg.observed, cfg.tolerances.clt);

  if (apriori) {
    std::vector<coag::EnsembleSummary> by_size;
    for (coag::mass_t n : cfg.sizes) by_size.push_back(n == cfg.n ? summary : ensemble(cfg, n, ref));
    report.append(coag::check_apriori_fluctuation_bounds(by_size, cfg.tolerances.fluctuation_factor));
    // LLN: the error at T falls with n at the sqrt(n) rate.
    std::vector<double> err;
    for (const auto& s : by_size) err.push_back(s.times.back().lln_error.mean);
    bool decreasing = true;
    double lo = 1e300, hi = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
      if (i > 0) decreasing = decreasing && err[i] < err[i - 1];
      const double scaled = std::sqrt(static_cast<double>(by_size[i].n)) * err[i];
      lo = std::min(lo, scaled);
      hi = std::max(hi, scaled);
    }
    const bool zero = hi == 0.0;
    report.checks.push_back({"LLN error decreasing in n", zero || decreasing, err.back(), err.front(), 0.0, ""});
    const double spread = zero ? 1.0 : hi / lo;
    report.checks.push_back({"sqrt(n) * LLN error spread", spread < 3.0, spread, 3.0, 0.0, ""});
  }
  dir.write("report.json", json(report).dump(2) + "\n");
  dir.finish({{"replicas", cfg.replicas}});
  std::cout << (report.passed() ? "PASS" : "FAIL") << ": " << report.checks.size() - report.failures() << "/"
            << report.checks.size() << " checks\n";
  return report.passed() ? exit_pass : exit_failed;
}

int cmd_oracle(const coag::RunConfig& cfg) {
  if (cfg.n > 8) throw coag::ConfigError("oracle-check: n = " + std::to_string(cfg.n) + " exceeds 8");
  RunDirectory dir(cfg, "oracle-check");
  const coag::PartitionChain chain(cfg.n, cfg.kernel);
  auto sim = cfg.simulation();
  sim.track_martingale = false;
  sim.truncation = static_cast<std::size_t>(cfg.n);
  coag::EnsembleReducer reducer(cfg.n, cfg.grid, sim.truncation);
  const unsigned threads = cfg.threads == 0 ? coag::default_thread_count(cfg.replicas) : cfg.threads;
  coag::run_replicas<coag::Trajectory>(
      cfg.replicas, threads, [&](std::uint64_t r) { return coag::run(sim, r); },
      [&](std::uint64_t, coag::Trajectory&& t) { reducer.add(t); });
  const auto summary = reducer.summary();

  coag::Report report{"oracle comparison", {}};
  json exact = json::array();
  const double n = static_cast<double>(cfg.n);
  for (const auto& ts : summary.times) {
    for (coag::mass_t l = 1; l <= cfg.n; ++l) {
      const double e = chain.expectation(ts.time, coag::observable::count(l));
      const auto& p = ts.pi[static_cast<std::size_t>(l - 1)];
      const double mean = p.mean * n, se = p.standard_error * n;
      const double k = cfg.tolerances.oracle_standard_errors;
      report.checks.push_back({"E[N_" + std::to_string(l) + "](t=" + coag::format_number(ts.time) + ")",
                               se > 0.0 ? std::abs(mean - e) <= k * se : std::abs(mean - e) <= 1e-9, mean, e, se, ""});
      exact.push_back({{"n", cfg.n}, {"kernel", coag::kernel_to_json(cfg.kernel)}, {"t", ts.time},
                       {"observable", "N_" + std::to_string(l)}, {"value", e}});
    }
    for (int p = 2; p <= 4; ++p) {
      exact.push_back({{"n", cfg.n}, {"kernel", coag::kernel_to_json(cfg.kernel)}, {"t", ts.time},
                       {"observable", "M_" + std::to_string(p)}, {"value", chain.expectation(ts.time, coag::observable::moment(p))}});
    }
  }
  dir.write("oracle.json", exact.dump(2) + "\n");
  dir.write_with("summary.csv", [&](std::ostream& os) { coag::write_summary_csv(os, summary); });
  dir.write("report.json", json(report).dump(2) + "\n");
  dir.finish({{"replicas", cfg.replicas}});
  std::cout << (report.passed() ? "PASS" : "FAIL") << ": " << report.checks.size() - report.failures() << "/"
            << report.checks.size() << " checks\n";
  return report.passed() ? exit_pass : exit_failed;
}

int cmd_validate(const coag::RunConfig& cfg) {
  RunDirectory dir(cfg, "validate");
  coag::SuiteConfig suite;
  suite.primary = cfg.kernel;
  suite.secondary = cfg.secondary_kernel;
  suite.master_seed = cfg.master_seed;
  suite.threads = cfg.threads;
  suite.replica_scale = cfg.replica_scale;
  suite.clt = cfg.tolerances.clt;
  suite.oracle_standard_errors = cfg.tolerances.oracle_standard_errors;
  suite.route_relative = cfg.tolerances.route_relative;
  suite.qv_relative = cfg.tolerances.qv_relative;
  suite.moment_standard_errors = cfg.tolerances.moment_standard_errors;
  json criteria = json::array();
  bool passed = true;
  coag::run_suite(suite, [&](const coag::CriterionResult& res) {
    std::cout << coag::verdict_line(res) << std::endl;
    passed = passed && res.report.passed();
    criteria.push_back({{"criterion", res.number}, {"seconds", res.seconds}, {"report", res.report}});
  });
  dir.write("report.json", json{{"passed", passed}, {"criteria", criteria}}.dump(2) + "\n");
  dir.finish();
  return passed ? exit_pass : exit_failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coaglab: stochastic coagulation laboratory"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "YAML config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed (overrides master_seed)");
    sub->add_option("--out", o.out, "output directory (default: out)");
    sub->add_option("--threads", o.threads, "worker threads (0: available cores, capped by replicas)");
    sub->add_option("--n", o.n, "system size");
    sub->add_option("--replicas", o.replicas, "number of replicas");
    sub->add_option("--sampler", o.sampler, "direct or thinning");
    sub->add_option("--set", o.set, "override a config field, e.g. --set tolerances.variance_relative=0.2")
        ->allow_extra_args(false);
  };
  auto* simulate = app.add_subcommand("simulate", "simulate replicas and write trajectories");
  auto* solve = app.add_subcommand("solve", "solve the deterministic equation");
  auto* predict = app.add_subcommand("fluct-predict", "predict fluctuation covariances by both routes");
  auto* empirical = app.add_subcommand("fluct-empirical", "compare simulated fluctuations with predictions");
  auto* oracle = app.add_subcommand("oracle-check", "compare simulation with the exact chain (n <= 8)");
  auto* validate = app.add_subcommand("validate", "run the acceptance suite");
  for (auto* sub : {simulate, solve, predict, empirical, oracle, validate}) add_common(sub);
  empirical->add_flag("--apriori", o.apriori, "also sweep the configured sizes for a priori bounds and LLN scaling");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_pass : exit_config;
  }

  try {
    const auto cfg = effective(o);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (solve->parsed()) return cmd_solve(cfg);
    if (predict->parsed()) return cmd_fluct_predict(cfg);
    if (empirical->parsed()) return cmd_fluct_empirical(cfg, o.apriori);
    if (oracle->parsed()) return cmd_oracle(cfg);
    if (validate->parsed()) return cmd_validate(cfg);
  } catch (const coag::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return exit_internal;
  }
  return exit_internal;
}
