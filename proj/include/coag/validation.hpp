#pragma once

// End-to-end acceptance checks. Each criterion returns a Report whose
// checks carry the observed value, the bound it is held to and, for Monte
// Carlo quantities, the standard error.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "coag/analysis.hpp"
#include "coag/ensemble.hpp"
#include "coag/fluctuation.hpp"
#include "coag/io.hpp"
#include "coag/kernel.hpp"
#include "coag/oracle.hpp"
#include "coag/rng.hpp"
#include "coag/simulator.hpp"
#include "coag/smoluchowski.hpp"
#include "coag/state.hpp"

namespace coag {

struct SuiteConfig {
  Kernel primary = Kernel::constant(1.0);
  Kernel secondary = Kernel::capped_brownian(1.0, 10.0);
  std::uint64_t master_seed = 0x5eed2024;
  unsigned threads = 0;
  double replica_scale = 1.0;  // multiplies every ensemble size
  CltTolerances clt;
  double oracle_standard_errors = 3.0;
  double route_relative = 1e-5;
  double qv_relative = 0.10;
  double moment_standard_errors = 3.0;
  double lln_spread = 3.0;
  double solver_tolerance = 1e-8;
  double order_ratio = 8.0;
  std::size_t property_cases = 1000;

  std::uint64_t replicas(std::uint64_t nominal) const {
    return std::max<std::uint64_t>(2, static_cast<std::uint64_t>(std::llround(static_cast<double>(nominal) * replica_scale)));
  }
};

/// Event-level conservation bookkeeping shared by every ensemble of a suite.
struct ConservationLog {
  std::atomic<std::uint64_t> events{0};
  std::atomic<std::uint64_t> violations{0};
  std::atomic<std::uint64_t> replicas{0};
  double max_mass_fluctuation = 0.0;  // over full histograms, updated by the reducing thread

  EventObserver observer() {
    return [this](const Event&, const MassHistogram& h) {
      events.fetch_add(1, std::memory_order_relaxed);
      if (h.total_mass() != h.n()) violations.fetch_add(1, std::memory_order_relaxed);
    };
  }
};

namespace detail {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline Check runtime_check(const std::string& what, double seconds, double limit) {
  return {"runtime " + what, seconds <= limit, seconds, limit, 0.0, "seconds"};
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::uint64_t seed_for(const SuiteConfig& s, std::uint64_t criterion, std::uint64_t variant) {
  return derive_seed(s.master_seed, criterion * 1000003ull + variant);
}

/// Simulates an ensemble and reduces it in replica order.
inline EnsembleSummary simulate(const SimulationConfig& cfg, std::uint64_t replicas, unsigned threads,
                                ConservationLog* log, const std::vector<DensityVector>& reference = {},
                                const std::vector<std::pair<mass_t, mass_t>>& pairs = {}) {
  cfg.validate();
  EnsembleReducer reducer(cfg.n, cfg.grid, cfg.truncation, reference, pairs);
  EventObserver observer = log != nullptr ? log->observer() : EventObserver{};
  run_replicas<Trajectory>(
      replicas, threads, [&](std::uint64_t r) { return run(cfg, r, observer); },
      [&](std::uint64_t, Trajectory&& t) { reducer.add(t); });
  auto summary = reducer.summary();
  if (log != nullptr) {
    log->replicas.fetch_add(replicas);
    for (const auto& ts : summary.times) log->max_mass_fluctuation = std::max(log->max_mass_fluctuation, ts.max_mass_fluctuation);
  }
  return summary;
}

/// u sampled every `spacing` on [0, T] at truncation L.
inline DeterministicTrajectory fine_solution(const Kernel& k, std::size_t L, double horizon, double spacing) {
  SolverConfig cfg;
  cfg.horizon = horizon;
  const auto intervals = static_cast<std::size_t>(std::llround(horizon / spacing));
  cfg.grid = uniform_grid(horizon, std::max<std::size_t>(1, intervals));
  cfg.dt = std::min(spacing, SolverConfig::stability_bound(k));
  return solve(k, DensityVector::delta_one(L), cfg);
}

/// Smallest power-of-two multiple of `start` (up to `cap`) with leaked mass
/// at T below `leak`.
inline std::size_t leak_free_truncation(const Kernel& k, double horizon, std::size_t start, std::size_t cap, double leak) {
  std::size_t L = start;
  for (;;) {
    SolverConfig cfg;
    cfg.horizon = horizon;
    cfg.grid = {horizon};
    cfg.dt = std::min(1e-2, SolverConfig::stability_bound(k));
    const auto traj = solve(k, DensityVector::delta_one(L), cfg);
    if (traj.states.back().leaked_mass < leak || L >= cap) return L;
    L *= 2;
  }
}

inline double relative(double a, double b) {
  if (a == b) return 0.0;
  const double scale = std::max(std::abs(a), std::abs(b));
  return std::abs(a - b) / scale;
}

}  // namespace detail

// 1. Simulator means of N_l(t) against the exact chain law.
inline Report criterion_oracle(const SuiteConfig& s, ConservationLog* log) {
  detail::Stopwatch clock;
  Report r{"exactness against the partition-chain oracle", {}};
  const std::vector<double> grid{0.25, 1.0};
  const std::uint64_t R = s.replicas(100000);
  const std::vector<std::pair<std::string, Kernel>> kernels{{"primary", s.primary}, {"secondary", s.secondary}};
  std::uint64_t variant = 0;
  for (const auto& [kname, kernel] : kernels) {
    for (mass_t n = 2; n <= 5; ++n) {
      const PartitionChain chain(n, kernel);
      for (Sampler sampler : {Sampler::direct, Sampler::thinning}) {
        SimulationConfig cfg;
        cfg.n = n;
        cfg.kernel = kernel;
        cfg.horizon = 1.0;
        cfg.grid = grid;
        cfg.truncation = static_cast<std::size_t>(n);
        cfg.master_seed = detail::seed_for(s, 1, variant++);
        cfg.sampler = sampler;
        cfg.track_martingale = false;
        const auto summary = detail::simulate(cfg, R, s.threads, log);
        for (const auto& ts : summary.times) {
          for (mass_t l = 1; l <= n; ++l) {
            const double exact = chain.expectation(ts.time, observable::count(l));
            const auto& p = ts.pi[static_cast<std::size_t>(l - 1)];
            const double mean = p.mean * static_cast<double>(n);
            const double se = p.standard_error * static_cast<double>(n);
            Check c;
            c.name = kname + " n=" + std::to_string(n) + " " + to_string(sampler) + " t=" + detail::fmt(ts.time) +
                     " E[N_" + std::to_string(l) + "]";
            c.observed = mean;
            c.bound = exact;
            c.standard_error = se;
            c.passed = se > 0.0 ? std::abs(mean - exact) <= s.oracle_standard_errors * se
                                : std::abs(mean - exact) <= 1e-9;
            c.detail = "z=" + detail::fmt(se > 0.0 ? (mean - exact) / se : 0.0);
            r.checks.push_back(std::move(c));
          }
        }
      }
    }
  }
  r.checks.push_back(detail::runtime_check("exactness", clock.seconds(), 60.0));
  return r;
}

// 2. Law of large numbers: E||pi_T - u(T)||_1 falls with n at the sqrt(n) rate.
inline Report criterion_lln(const SuiteConfig& s, ConservationLog* log) {
  detail::Stopwatch clock;
  Report r{"hydrodynamic limit", {}};
  const double T = 1.0;
  const std::size_t L = 64;
  const std::uint64_t R = s.replicas(200);
  DensityVector u(L);
  if (s.primary.kind() == KernelKind::constant) {
    u = constant_kernel_density(L, T, s.primary.rate_constant());
  } else {
    u = detail::fine_solution(s.primary, L, T, 1e-3).states.back();
  }
  std::vector<double> err;
  const std::vector<mass_t> sizes{100, 1000, 10000};
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    SimulationConfig cfg;
    cfg.n = sizes[i];
    cfg.kernel = s.primary;
    cfg.horizon = T;
    cfg.grid = {T};
    cfg.truncation = L;
    cfg.master_seed = detail::seed_for(s, 2, i);
    cfg.track_martingale = false;
    const auto summary = detail::simulate(cfg, R, s.threads, log, {u});
    const auto& e = summary.times.back().lln_error;
    err.push_back(e.mean);
    r.checks.push_back({"E||pi - u||_1 at n=" + std::to_string(sizes[i]), true, e.mean, 0.0, e.standard_error,
                        "sqrt(n) * error = " + detail::fmt(std::sqrt(static_cast<double>(sizes[i])) * e.mean)});
  }
  const bool degenerate = std::all_of(err.begin(), err.end(), [](double e) { return e == 0.0; });
  bool decreasing = true;
  for (std::size_t i = 1; i < err.size(); ++i) decreasing = decreasing && err[i] < err[i - 1];
  r.checks.push_back({"error strictly decreasing in n", degenerate || decreasing, err.back(), err.front(), 0.0,
                      degenerate ? "all errors zero (trivial)" : ""});
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double scaled = std::sqrt(static_cast<double>(sizes[i])) * err[i];
    lo = std::min(lo, scaled);
    hi = std::max(hi, scaled);
  }
  const double spread = degenerate ? 1.0 : (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
  r.checks.push_back({"sqrt(n) * error spread", spread < s.lln_spread, spread, s.lln_spread, 0.0, "max/min over n"});
  r.checks.push_back(detail::runtime_check("hydrodynamic limit", clock.seconds(), 300.0));
  return r;
}

// 3. Solver against the closed-form constant-kernel solution, and its order.
inline Report criterion_solver(const SuiteConfig& s) {
  detail::Stopwatch clock;
  Report r{"deterministic solver", {}};
  const double c = s.primary.kind() == KernelKind::constant ? s.primary.rate_constant() : 1.0;
  const Kernel k = Kernel::constant(c);
  const std::size_t L = 64;
  const std::vector<double> times{0.5, 1.0, 2.0};
  auto max_error = [&](double dt) {
    SolverConfig cfg;
    cfg.dt = dt;
    cfg.horizon = times.back();
    cfg.grid = times;
    const auto traj = solve(k, DensityVector::delta_one(L), cfg);
    double err = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      for (std::size_t l = 0; l < L; ++l) {
        err = std::max(err, std::abs(traj.states[j].values[l] -
                                     constant_kernel_exact(static_cast<mass_t>(l + 1), times[j], c)));
      }
    }
    return err;
  };
  const double dt_fine = std::min(1e-3, SolverConfig::stability_bound(k));
  const double e_fine = max_error(dt_fine);
  r.checks.push_back({"max error, dt=" + detail::fmt(dt_fine), e_fine <= s.solver_tolerance, e_fine, s.solver_tolerance,
                      0.0, "t in {0.5, 1, 2}, L=64"});
  // The order is measured where truncation error dominates round-off.
  const double dt_coarse = std::min(0.1, SolverConfig::stability_bound(k));
  const double e1 = max_error(dt_coarse);
  const double e2 = max_error(dt_coarse / 2.0);
  const double ratio = e2 > 0.0 ? e1 / e2 : (e1 == 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  r.checks.push_back({"error ratio when halving dt=" + detail::fmt(dt_coarse), ratio >= s.order_ratio, ratio,
                      s.order_ratio, 0.0, "errors " + detail::fmt(e1) + " -> " + detail::fmt(e2)});
  r.checks.push_back(detail::runtime_check("solver", clock.seconds(), 30.0));
  return r;
}

// 4. Fluctuation variance and Gaussianity against the Lyapunov prediction.
inline Report criterion_clt(const SuiteConfig& s, ConservationLog* log) {
  detail::Stopwatch clock;
  Report r{"central limit", {}};
  const double T = 1.0;
  const std::size_t L = 64;
  const double step = 2e-3;
  const auto u_traj = detail::fine_solution(s.primary, L, T, step / 2.0);
  const auto sigma = covariance_lyapunov(s.primary, u_traj, {T}, {step});

  SimulationConfig cfg;
  cfg.n = 10000;
  cfg.kernel = s.primary;
  cfg.horizon = T;
  cfg.grid = {T};
  cfg.truncation = L;
  cfg.master_seed = detail::seed_for(s, 4, 0);
  cfg.track_martingale = false;
  const auto summary = detail::simulate(cfg, s.replicas(2000), s.threads, log, {u_traj.at(T)});
  r.append(clt_report(summary, sigma, {1, 2, 3}, s.clt));
  r.checks.push_back(detail::runtime_check("central limit", clock.seconds(), 600.0));
  return r;
}

// 5. Lyapunov and dual-equation variances agree.
inline Report criterion_routes(const SuiteConfig& s) {
  detail::Stopwatch clock;
  Report r{"route cross-check", {}};
  const double T = 1.0;
  const double step = 2e-3;
  const std::vector<std::pair<std::string, std::vector<mass_t>>> functionals{
      {"1{1}", {1}}, {"1{2}", {2}}, {"1{3}", {3}}, {"1{l<=5}", {1, 2, 3, 4, 5}}};
  for (const auto& [kname, kernel] : {std::pair{std::string("primary"), s.primary}, std::pair{std::string("secondary"), s.secondary}}) {
    const std::size_t L = detail::leak_free_truncation(kernel, T, 64, 512, 1e-10);
    const auto u_traj = detail::fine_solution(kernel, L, T, step / 2.0);
    const auto sigma = covariance_lyapunov(kernel, u_traj, {T}, {step}).back();
    for (const auto& [gname, support] : functionals) {
      const auto g = indicator(support);
      std::vector<double> gl(L, 0.0);
      std::copy(g.begin(), g.end(), gl.begin());
      const double lyap = sigma.quadratic(gl);
      const double dual = dual_solve(kernel, g, T, u_traj, 0, {step}).variance;
      const double rel = detail::relative(dual, lyap);
      r.checks.push_back({kname + " g=" + gname, rel <= s.route_relative, rel, s.route_relative, 0.0,
                          "lyapunov " + format_number(lyap) + ", dual " + format_number(dual) + ", L=" +
                              std::to_string(L)});
    }
  }
  r.checks.push_back(detail::runtime_check("route cross-check", clock.seconds(), 60.0));
  return r;
}

// 6. Dynkin martingale: mean zero, variance equal to the mean quadratic variation.
inline Report criterion_martingale(const SuiteConfig& s, ConservationLog* log) {
  detail::Stopwatch clock;
  Report r{"martingale diagnostics", {}};
  SimulationConfig cfg;
  cfg.n = 1000;
  cfg.kernel = s.primary;
  cfg.horizon = 1.0;
  cfg.grid = {0.5, 1.0};
  cfg.truncation = 8;
  cfg.master_seed = detail::seed_for(s, 6, 0);
  cfg.track_martingale = true;
  const auto summary = detail::simulate(cfg, s.replicas(2000), s.threads, log);
  for (const auto& ts : summary.times) {
    for (mass_t l : {1, 2, 4}) {
      const auto& m = ts.martingale[static_cast<std::size_t>(l - 1)];
      const auto& q = ts.qv[static_cast<std::size_t>(l - 1)];
      const std::string tag = "(l=" + std::to_string(l) + ", t=" + detail::fmt(ts.time) + ")";
      r.checks.push_back({"mean M" + tag, std::abs(m.mean) <= s.clt.mean_standard_errors * m.standard_error ||
                                              (m.mean == 0.0 && m.standard_error == 0.0),
                          m.mean, 0.0, m.standard_error, ""});
      const double rel = m.variance == q.mean ? 0.0 : std::abs(m.variance - q.mean) / q.mean;
      r.checks.push_back({"Var M vs E QV" + tag, rel <= s.qv_relative, m.variance, q.mean, q.standard_error,
                          "relative " + detail::fmt(rel)});
    }
  }
  r.checks.push_back(detail::runtime_check("martingale", clock.seconds(), 300.0));
  return r;
}

// 7. Randomized checks of the operator bounds and identities.
namespace detail {

inline Kernel random_kernel(RandomStream& rng) {
  switch (rng.below(3)) {
    case 0:
      return Kernel::constant(3.0 * rng.uniform(), 32);
    case 1:
      return Kernel::capped_brownian(0.1 + 2.0 * rng.uniform(), 1.0 + 19.0 * rng.uniform(), 32);
    default: {
      const auto dim = static_cast<mass_t>(1 + rng.below(10));
      std::vector<double> t(static_cast<std::size_t>(dim * dim));
      for (mass_t a = 0; a < dim; ++a) {
        for (mass_t b = a; b < dim; ++b) {
          const double v = 5.0 * rng.uniform();
          t[static_cast<std::size_t>(a * dim + b)] = v;
          t[static_cast<std::size_t>(b * dim + a)] = v;
        }
      }
      return Kernel::lookup_table(std::move(t), dim, 2.0 * rng.uniform(), 32);
    }
  }
}

/// Random element of M_+ on {1..L} with l1 norm in (0, 1].
inline std::vector<double> random_density(RandomStream& rng, std::size_t L) {
  std::vector<double> u(L);
  double sum = 0.0;
  for (auto& x : u) {
    x = rng.uniform() < 0.3 ? 0.0 : rng.exponential(1.0);
    sum += x;
  }
  if (sum == 0.0) {
    u[0] = 1.0;
    sum = 1.0;
  }
  const double target = 1.0 - rng.uniform();  // (0, 1]
  for (auto& x : u) x *= target / sum;
  return u;
}

inline std::vector<double> random_signed(RandomStream& rng, std::size_t L, double scale) {
  std::vector<double> v(L);
  for (auto& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

inline std::vector<double> subtract(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) s += a[i] * b[i];
  return s;
}

/// Tally of one randomized property.
struct PropertyTally {
  std::string name;
  std::size_t cases = 0;
  std::size_t violations = 0;
  double worst = 0.0;  // largest observed lhs / rhs (or deviation for identities)

  void record(double lhs, double rhs, double slack = 1e-12) {
    ++cases;
    const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    worst = std::max(worst, ratio);
    if (lhs > rhs * (1.0 + slack) + slack * 1e-3) ++violations;
  }

  void record_deviation(double deviation, double tolerance) {
    ++cases;
    worst = std::max(worst, deviation);
    if (deviation > tolerance) ++violations;
  }

  Check check(const std::string& ratio_label) const {
    return {name, violations == 0, static_cast<double>(violations), 0.0, 0.0,
            std::to_string(cases) + " cases, worst " + ratio_label + " " + fmt(worst)};
  }
};

}  // namespace detail

inline Report criterion_properties(const SuiteConfig& s) {
  using namespace detail;
  Stopwatch clock;
  Report r{"operator bounds and identities", {}};
  RandomStream rng(seed_for(s, 7, 0));
  const std::size_t cases = s.property_cases;

  PropertyTally copiapo{"||Ku||_1 <= 3|K| ||u||_1^2"}, caldera{"||Ku - Kv||_1 <= 3|K| (||u||_1 + ||v||_1) ||u - v||_1"},
      huasco{"||A(u,v)||_1 <= 6|K| ||u||_1 ||v||_1"}, q2{"|Q(u;f)| <= 9|K| ||u||_1^2 ||f||_inf^2"},
      colina{"||Ru||_1 <= 3|K| ||u||_1"}, llolleo{"n Gamma_n pi(l) <= 3|K|"}, twice{"A(u,u) = 2 Ku"},
      duality{"<A(u,v), f> = <v, A*(u,f)>"};

  for (std::size_t c = 0; c < cases; ++c) {
    const Kernel k = random_kernel(rng);
    const double K = k.sup_norm();
    const std::size_t L = 1 + rng.below(24);
    const auto u = random_density(rng, L);
    const auto v = random_density(rng, L);
    const double nu = norm_l1(u), nv = norm_l1(v);

    copiapo.record(norm_l1(apply_K(k, u)), 3.0 * K * nu * nu);
    caldera.record(norm_l1(subtract(apply_K(k, u), apply_K(k, v))), 3.0 * K * (nu + nv) * norm_l1(subtract(u, v)));

    const auto w = random_signed(rng, L, 1.0 + 4.0 * rng.uniform());
    huasco.record(norm_l1(apply_A(k, u, w)), 6.0 * K * nu * norm_l1(w));

    const auto f = random_signed(rng, 2 * L, 1.0 + 4.0 * rng.uniform());
    q2.record(std::abs(q_form(k, u, f)), 9.0 * K * nu * nu * norm_sup(f) * norm_sup(f));

    colina.record(norm_l1(apply_R(k, u)), 3.0 * K * nu);

    const auto a_uu = apply_A(k, u, u);
    const auto k_u = apply_K(k, u);
    double dev = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      dev = std::max(dev, std::abs(a_uu[i] - 2.0 * k_u[i]));
      scale = std::max(scale, std::abs(a_uu[i]));
    }
    twice.record_deviation(dev, 1e-13 * std::max(1.0, scale));

    // u, v on {1..L}, f on {1..2L}: every merge stays inside f's support.
    std::vector<double> u2(2 * L, 0.0), v2(2 * L, 0.0);
    std::copy(u.begin(), u.end(), u2.begin());
    std::copy(w.begin(), w.end(), v2.begin());
    const double lhs = dot(apply_A(k, u2, v2), f);
    const double rhs = dot(v2, apply_A_star(k, u2, f));
    duality.record_deviation(std::abs(lhs - rhs), 1e-12 * std::max(1.0, std::abs(lhs)));
  }

  // Carre du champ bound on states the chain visits from the monodisperse
  // start, including the start itself.
  for (std::size_t c = 0; c < cases; ++c) {
    const Kernel k = random_kernel(rng);
    const auto n = static_cast<mass_t>(2 + rng.below(199));
    Simulator sim(MassHistogram::monodisperse(n), k, Sampler::direct, RandomStream(rng.next()));
    const auto merges = rng.below(static_cast<std::uint64_t>(n));
    for (std::uint64_t m = 0; m < merges; ++m) {
      if (!sim.step(std::numeric_limits<double>::max())) break;
    }
    const auto& h = sim.histogram();
    const auto L = static_cast<std::size_t>(std::min<mass_t>(n, 64));
    const auto qv = qv_integrand(h, k, L);
    llolleo.record(*std::max_element(qv.begin(), qv.end()), 3.0 * k.sup_norm());
  }

  for (auto* t : {&copiapo, &caldera, &huasco, &q2, &colina, &llolleo}) r.checks.push_back(t->check("lhs/rhs"));
  for (auto* t : {&twice, &duality}) r.checks.push_back(t->check("deviation"));
  r.checks.push_back(runtime_check("properties", clock.seconds(), 60.0));
  return r;
}

// 8. Moment bounds.
inline Report criterion_moments(const SuiteConfig& s, ConservationLog* log) {
  detail::Stopwatch clock;
  SimulationConfig cfg;
  cfg.n = 1000;
  cfg.kernel = s.primary;
  cfg.horizon = 2.0;
  cfg.grid = uniform_grid(2.0, 10);
  cfg.grid.erase(cfg.grid.begin());  // ten times 0.2, ..., 2
  cfg.truncation = 1;
  cfg.master_seed = detail::seed_for(s, 8, 0);
  cfg.track_martingale = false;
  const auto summary = detail::simulate(cfg, s.replicas(500), s.threads, log);
  Report r = check_moment_bounds(summary, s.primary, s.moment_standard_errors);
  r.checks.push_back(detail::runtime_check("moments", clock.seconds(), 120.0));
  return r;
}

// 9. Conservation: per-event mass, full-histogram mass functional, and Q on
// linear test functions.
inline Report criterion_conservation(const SuiteConfig& s, const ConservationLog& log) {
  Report r{"conservation invariants", {}};
  r.checks.push_back({"sum l N_l == n after every event", log.violations.load() == 0,
                      static_cast<double>(log.violations.load()), 0.0, 0.0,
                      std::to_string(log.events.load()) + " events in " + std::to_string(log.replicas.load()) +
                          " replicas"});
  r.checks.push_back({"sum l xi(l) == 0 on full histograms", log.max_mass_fluctuation == 0.0, log.max_mass_fluctuation,
                      0.0, 0.0, "max over all simulated replicas and grid times"});
  RandomStream rng(detail::seed_for(s, 9, 0));
  detail::PropertyTally linear{"Q(u; c l) == 0"};
  for (std::size_t c = 0; c < s.property_cases; ++c) {
    const Kernel k = detail::random_kernel(rng);
    const std::size_t L = 1 + rng.below(24);
    const auto u = detail::random_density(rng, L);
    const double slope = 10.0 * (2.0 * rng.uniform() - 1.0);
    std::vector<double> f(2 * L);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = slope * static_cast<double>(i + 1);
    const double scale = std::max(1.0, k.sup_norm() * norm_sup(f) * norm_sup(f));
    linear.record_deviation(std::abs(q_form(k, u, f)), 64.0 * std::numeric_limits<double>::epsilon() * scale);
  }
  r.checks.push_back(linear.check("|Q|"));
  return r;
}

struct CriterionResult {
  int number = 0;
  Report report;
  double seconds = 0.0;
};

/// Runs criteria 1-9 in order; `on_result` sees each as it completes.
inline std::vector<CriterionResult> run_suite(const SuiteConfig& s,
                                              const std::function<void(const CriterionResult&)>& on_result = {}) {
  ConservationLog log;
  std::vector<CriterionResult> out;
  auto record = [&](int number, const std::function<Report()>& body) {
    detail::Stopwatch clock;
    CriterionResult res{number, body(), 0.0};
    res.seconds = clock.seconds();
    if (on_result) on_result(res);
    out.push_back(std::move(res));
  };
  record(1, [&] { return criterion_oracle(s, &log); });
  record(2, [&] { return criterion_lln(s, &log); });
  record(3, [&] { return criterion_solver(s); });
  record(4, [&] { return criterion_clt(s, &log); });
  record(5, [&] { return criterion_routes(s); });
  record(6, [&] { return criterion_martingale(s, &log); });
  record(7, [&] { return criterion_properties(s); });
  record(8, [&] { return criterion_moments(s, &log); });
  record(9, [&] { return criterion_conservation(s, log); });
  return out;
}

/// One-line verdict for a criterion: the failing checks, or the first check.
inline std::string verdict_line(const CriterionResult& res) {
  std::string line = "criterion " + std::to_string(res.number) + ": " + (res.report.passed() ? "PASS" : "FAIL") + "  " +
                     res.report.title + " (" + std::to_string(res.report.checks.size()) + " checks";
  if (!res.report.passed()) line += ", " + std::to_string(res.report.failures()) + " failed";
  line += ", " + detail::fmt(res.seconds) + " s)";
  for (const auto& c : res.report.checks) {
    if (!c.passed) {
      line += "; failed: " + c.name + " observed " + detail::fmt(c.observed) + " vs " + detail::fmt(c.bound);
      if (!c.detail.empty()) line += " [" + c.detail + "]";
    }
  }
  return line;
}

}  // namespace coag
