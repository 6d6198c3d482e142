#pragma once

// Ensemble statistics and checks of the a priori bounds.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coag/fluctuation.hpp"
#include "coag/kernel.hpp"
#include "coag/simulator.hpp"
#include "coag/state.hpp"

namespace coag {

/// One-pass central moments up to order four (Pebay's update).
class MomentAccumulator {
 public:
  void add(double x) noexcept {
    const double n1 = static_cast<double>(n_);
    ++n_;
    const double n = static_cast<double>(n_);
    const double delta = x - mean_;
    const double delta_n = delta / n;
    const double delta_n2 = delta_n * delta_n;
    const double term1 = delta * delta_n * n1;
    mean_ += delta_n;
    m4_ += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2_ - 4.0 * delta_n * m3_;
    m3_ += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2_;
    m2_ += term1;
  }

  std::uint64_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  /// Unbiased sample variance (0 for fewer than two samples).
  double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double standard_error() const noexcept { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
  /// Sample skewness g1; 0 for a degenerate sample.
  double skewness() const noexcept {
    if (n_ < 2 || m2_ <= 0.0) return 0.0;
    const double n = static_cast<double>(n_);
    return std::sqrt(n) * m3_ / std::pow(m2_, 1.5);
  }
  /// Sample excess kurtosis g2; 0 for a degenerate sample.
  double excess_kurtosis() const noexcept {
    if (n_ < 2 || m2_ <= 0.0) return 0.0;
    const double n = static_cast<double>(n_);
    return n * m4_ / (m2_ * m2_) - 3.0;
  }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
};

/// One-pass co-moment of a pair.
class CovarianceAccumulator {
 public:
  void add(double x, double y) noexcept {
    ++n_;
    const double n = static_cast<double>(n_);
    const double dx = x - mean_x_;
    mean_x_ += dx / n;
    mean_y_ += (y - mean_y_) / n;
    c_ += dx * (y - mean_y_);
  }
  std::uint64_t count() const noexcept { return n_; }
  double covariance() const noexcept { return n_ > 1 ? c_ / static_cast<double>(n_ - 1) : 0.0; }

 private:
  std::uint64_t n_ = 0;
  double mean_x_ = 0.0, mean_y_ = 0.0, c_ = 0.0;
};

struct PointStats {
  double mean = 0.0;
  double variance = 0.0;
  double standard_error = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;

  static PointStats of(const MomentAccumulator& a) {
    return {a.mean(), a.variance(), a.standard_error(), a.skewness(), a.excess_kurtosis()};
  }
};

struct PairStats {
  mass_t a = 0;
  mass_t b = 0;
  double covariance = 0.0;
};

struct TimeSummary {
  double time = 0.0;
  std::vector<PointStats> pi;          // per l = 1..L
  std::vector<PointStats> xi;          // per l, when a reference is given
  std::array<PointStats, 5> moments;   // M_p, p = 0..4, over the full histogram
  std::vector<PointStats> martingale;  // per l, when tracked
  std::vector<PointStats> qv;          // per l: int n Gamma_n ds
  PointStats xi_l1_squared;            // ||xi||_1^2
  PointStats xi_weighted;              // sum l |xi_l|
  PointStats lln_error;                // ||pi - u||_1
  std::vector<PairStats> covariances;  // selected xi pairs
  double max_mass_fluctuation = 0.0;   // max_r |sum_l l xi_l| on full histograms
};

struct EnsembleSummary {
  mass_t n = 0;
  std::size_t truncation = 0;
  std::uint64_t replicas = 0;
  std::vector<TimeSummary> times;

  const TimeSummary& at(double t) const {
    for (const auto& s : times) {
      if (std::abs(s.time - t) <= 1e-12 * std::max(1.0, std::abs(t))) return s;
    }
    throw std::out_of_range("summary: no grid time " + std::to_string(t));
  }
};

/// Streaming reducer over replicas. Replicas must be added in index order
/// for bit-identical summaries.
class EnsembleReducer {
 public:
  /// `reference[j]` is u at grid time j (optional: without it, fluctuation
  /// statistics are left empty).
  EnsembleReducer(mass_t n, std::vector<double> grid, std::size_t truncation,
                  std::vector<DensityVector> reference = {}, std::vector<std::pair<mass_t, mass_t>> pairs = {})
      : n_(n), grid_(std::move(grid)), truncation_(truncation), reference_(std::move(reference)), pairs_(std::move(pairs)) {
    if (!reference_.empty() && reference_.size() != grid_.size()) {
      throw std::invalid_argument("reducer: reference must have one density per grid time");
    }
    for (const auto& r : reference_) {
      if (r.truncation() != truncation_) throw std::invalid_argument("reducer: reference truncation mismatch");
    }
    for (auto [a, b] : pairs_) {
      if (a < 1 || b < 1 || static_cast<std::size_t>(std::max(a, b)) > truncation_) {
        throw std::invalid_argument("reducer: covariance pair outside 1..L");
      }
    }
    per_time_.resize(grid_.size());
    for (auto& p : per_time_) {
      p.pi.resize(truncation_);
      p.xi.resize(reference_.empty() ? 0 : truncation_);
      p.cov.resize(pairs_.size());
    }
  }

  void add(const Trajectory& traj) {
    if (traj.final_state.n() != n_) throw std::invalid_argument("reducer: replica has a different n");
    if (traj.snapshots.size() != grid_.size()) throw std::invalid_argument("reducer: replica has a different grid");
    const double sqrt_n = std::sqrt(static_cast<double>(n_));
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      const Snapshot& s = traj.snapshots[j];
      if (s.time != grid_[j]) throw std::invalid_argument("reducer: replica grid time mismatch");
      if (s.density.truncation() != truncation_) throw std::invalid_argument("reducer: replica truncation mismatch");
      auto& acc = per_time_[j];
      for (std::size_t l = 0; l < truncation_; ++l) acc.pi[l].add(s.density.values[l]);
      for (std::size_t p = 0; p < 5; ++p) acc.moments[p].add(s.moments[p]);
      if (!s.martingale.empty()) {
        if (acc.martingale.empty()) {
          if (replicas_ != 0) throw std::invalid_argument("reducer: martingale tracking differs across replicas");
          acc.martingale.resize(truncation_);
          acc.qv.resize(truncation_);
        }
        for (std::size_t l = 0; l < truncation_; ++l) {
          acc.martingale[l].add(s.martingale[l]);
          acc.qv[l].add(s.qv_integral[l]);
        }
      } else if (!acc.martingale.empty()) {
        throw std::invalid_argument("reducer: martingale tracking differs across replicas");
      }
      // Full-histogram mass functional: sqrt(n) (sum l N_l / n - 1); u has unit mass.
      acc.max_mass = std::max(acc.max_mass, sqrt_n * std::abs(static_cast<double>(s.total_mass - n_)) /
                                                static_cast<double>(n_));
      if (!reference_.empty()) {
        const FluctuationVector xi = fluctuation(s.density, reference_[j], n_);
        for (std::size_t l = 0; l < truncation_; ++l) acc.xi[l].add(xi.values[l]);
        const double l1 = norm_l1(xi);
        acc.xi_l1_sq.add(l1 * l1);
        acc.xi_weighted.add(norm_l1_weighted(xi));
        acc.lln.add(l1 / sqrt_n);
        for (std::size_t p = 0; p < pairs_.size(); ++p) acc.cov[p].add(xi[pairs_[p].first], xi[pairs_[p].second]);
      }
    }
    ++replicas_;
  }

  EnsembleSummary summary() const {
    EnsembleSummary out;
    out.n = n_;
    out.truncation = truncation_;
    out.replicas = replicas_;
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      const auto& acc = per_time_[j];
      TimeSummary t;
      t.time = grid_[j];
      for (const auto& a : acc.pi) t.pi.push_back(PointStats::of(a));
      for (const auto& a : acc.xi) t.xi.push_back(PointStats::of(a));
      for (std::size_t p = 0; p < 5; ++p) t.moments[p] = PointStats::of(acc.moments[p]);
      for (const auto& a : acc.martingale) t.martingale.push_back(PointStats::of(a));
      for (const auto& a : acc.qv) t.qv.push_back(PointStats::of(a));
      t.xi_l1_squared = PointStats::of(acc.xi_l1_sq);
      t.xi_weighted = PointStats::of(acc.xi_weighted);
      t.lln_error = PointStats::of(acc.lln);
      for (std::size_t p = 0; p < pairs_.size(); ++p) {
        t.covariances.push_back({pairs_[p].first, pairs_[p].second, acc.cov[p].covariance()});
      }
      t.max_mass_fluctuation = acc.max_mass;
      out.times.push_back(std::move(t));
    }
    return out;
  }

 private:
  struct PerTime {
    std::vector<MomentAccumulator> pi, xi, martingale, qv;
    std::array<MomentAccumulator, 5> moments;
    MomentAccumulator xi_l1_sq, xi_weighted, lln;
    std::vector<CovarianceAccumulator> cov;
    double max_mass = 0.0;
  };

  mass_t n_;
  std::vector<double> grid_;
  std::size_t truncation_;
  std::vector<DensityVector> reference_;
  std::vector<std::pair<mass_t, mass_t>> pairs_;
  std::vector<PerTime> per_time_;
  std::uint64_t replicas_ = 0;
};

/// Reduces a set of trajectories given in replica order.
inline EnsembleSummary reduce(const std::vector<Trajectory>& trajectories, const std::vector<DensityVector>& reference = {},
                              const std::vector<std::pair<mass_t, mass_t>>& pairs = {}) {
  if (trajectories.empty()) throw std::invalid_argument("reduce: no trajectories");
  const auto& first = trajectories.front();
  std::vector<double> grid;
  for (const auto& s : first.snapshots) grid.push_back(s.time);
  const std::size_t L = first.snapshots.empty() ? 0 : first.snapshots.front().density.truncation();
  EnsembleReducer reducer(first.final_state.n(), grid, L, reference, pairs);
  for (const auto& t : trajectories) reducer.add(t);
  return reducer.summary();
}

// ---------------------------------------------------------------------------
// Reports

struct Check {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double bound = 0.0;  // reference value or threshold the observation is held to
  double standard_error = 0.0;
  std::string detail;
};

struct Report {
  std::string title;
  std::vector<Check> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; }));
  }
  void append(const Report& other) { checks.insert(checks.end(), other.checks.begin(), other.checks.end()); }
};

inline void to_json(nlohmann::json& j, const Check& c) {
  j = {{"name", c.name}, {"passed", c.passed}, {"observed", c.observed}, {"bound", c.bound},
       {"standard_error", c.standard_error}, {"detail", c.detail}};
}

inline void to_json(nlohmann::json& j, const Report& r) {
  j = {{"title", r.title}, {"passed", r.passed()}, {"failures", r.failures()}, {"checks", r.checks}};
}

/// C(p) = (2^p - 2) / (p - 1).
inline double moment_constant(int p) {
  if (p < 2) throw std::invalid_argument("moment_constant: p must be >= 2");
  return (std::pow(2.0, p) - 2.0) / static_cast<double>(p - 1);
}

/// Upper bound on M_p(t): (1 + C(p) ||K|| t)^{p-1}.
inline double moment_bound(int p, double sup_norm, double t) {
  return std::pow(1.0 + moment_constant(p) * sup_norm * t, p - 1);
}

/// Flags any grid time where the empirical M_p exceeds its bound by more
/// than `se_slack` standard errors, p in {2, 3, 4}.
inline Report check_moment_bounds(const EnsembleSummary& s, const Kernel& k, double se_slack = 3.0) {
  Report r{"moment bounds", {}};
  for (const auto& ts : s.times) {
    for (int p = 2; p <= 4; ++p) {
      const auto& m = ts.moments[static_cast<std::size_t>(p)];
      const double bound = moment_bound(p, k.sup_norm(), ts.time);
      Check c;
      c.name = "M" + std::to_string(p) + "(t=" + std::to_string(ts.time) + ")";
      c.observed = m.mean;
      c.bound = bound;
      c.standard_error = m.standard_error;
      c.passed = m.mean <= bound + se_slack * m.standard_error;
      r.checks.push_back(std::move(c));
    }
  }
  return r;
}

struct CltTolerances {
  double mean_standard_errors = 3.0;
  double variance_relative = 0.15;
  double skewness_sigmas = 5.0;  // |g1| <= sigmas * sqrt(6/R)
  double kurtosis_sigmas = 5.0;  // |g2| <= sigmas * sqrt(24/R)
  double covariance_relative = 0.15;  // relative to sqrt(Sigma_aa Sigma_bb)
};

inline double relative_discrepancy(double observed, double predicted) {
  if (observed == predicted) return 0.0;
  const double scale = std::abs(predicted);
  return scale > 0.0 ? std::abs(observed - predicted) / scale : std::numeric_limits<double>::infinity();
}

/// Compares the empirical law of xi(l) with the predicted covariance at every
/// grid time that has a prediction. `predicted` holds one matrix per
/// summary grid time (matched by time).
inline Report clt_report(const EnsembleSummary& s, const std::vector<CovarianceMatrix>& predicted,
                         const std::vector<mass_t>& masses, const CltTolerances& tol = {}) {
  Report r{"central limit", {}};
  const double R = static_cast<double>(s.replicas);
  for (const auto& sigma : predicted) {
    const TimeSummary& ts = s.at(sigma.time);
    if (ts.xi.empty()) throw std::invalid_argument("clt_report: summary has no fluctuation statistics");
    const std::string at = "(t=" + std::to_string(ts.time) + ")";
    for (mass_t l : masses) {
      if (l < 1 || static_cast<std::size_t>(l) > ts.xi.size() || static_cast<std::size_t>(l) > sigma.truncation()) {
        throw std::invalid_argument("clt_report: mass outside the truncation");
      }
      const PointStats& x = ts.xi[static_cast<std::size_t>(l - 1)];
      const double var_pred = sigma(l, l);
      const std::string tag = "xi(" + std::to_string(l) + ")" + at;

      Check mean{"mean " + tag, false, x.mean, 0.0, x.standard_error, ""};
      mean.passed = std::abs(x.mean) <= tol.mean_standard_errors * x.standard_error;
      r.checks.push_back(mean);

      Check var{"variance " + tag, false, x.variance, var_pred, 0.0, ""};
      const double rel = relative_discrepancy(x.variance, var_pred);
      var.passed = rel <= tol.variance_relative;
      if (R > 1.0) {
        // Gaussian sampling SE of a variance: sigma^2 sqrt(2/(R-1)).
        var.standard_error = var_pred * std::sqrt(2.0 / (R - 1.0));
        const double z = var.standard_error > 0.0 ? (x.variance - var_pred) / var.standard_error : 0.0;
        var.detail = "relative error " + std::to_string(rel) + ", chi-square z " + std::to_string(z);
      }
      r.checks.push_back(var);

      const double skew_limit = R > 0.0 ? tol.skewness_sigmas * std::sqrt(6.0 / R) : 0.0;
      r.checks.push_back({"skewness " + tag, std::abs(x.skewness) <= skew_limit, x.skewness, skew_limit, 0.0, ""});
      const double kurt_limit = R > 0.0 ? tol.kurtosis_sigmas * std::sqrt(24.0 / R) : 0.0;
      r.checks.push_back(
          {"excess kurtosis " + tag, std::abs(x.excess_kurtosis) <= kurt_limit, x.excess_kurtosis, kurt_limit, 0.0, ""});
    }
    for (const auto& pair : ts.covariances) {
      if (static_cast<std::size_t>(std::max(pair.a, pair.b)) > sigma.truncation()) continue;
      const double pred = sigma(pair.a, pair.b);
      const double scale = std::sqrt(std::max(0.0, sigma(pair.a, pair.a) * sigma(pair.b, pair.b)));
      const double diff = std::abs(pair.covariance - pred);
      Check c{"covariance xi(" + std::to_string(pair.a) + "),xi(" + std::to_string(pair.b) + ")" + at, false,
              pair.covariance, pred, 0.0, ""};
      c.passed = diff == 0.0 || (scale > 0.0 && diff <= tol.covariance_relative * scale);
      r.checks.push_back(c);
    }
    r.checks.push_back({"mass functional " + at, ts.max_mass_fluctuation == 0.0, ts.max_mass_fluctuation, 0.0, 0.0,
                        "sum_l l xi(l) on full histograms, exact"});
  }
  return r;
}

/// E||xi_t||_1^2 and E sum l |xi_t(l)| across system sizes: both curves must
/// be finite and agree within `factor` across sizes at every grid time.
inline Report check_apriori_fluctuation_bounds(const std::vector<EnsembleSummary>& by_size, double factor = 2.0) {
  Report r{"a priori fluctuation bounds", {}};
  if (by_size.empty()) return r;
  const auto& first = by_size.front();
  for (std::size_t j = 0; j < first.times.size(); ++j) {
    const double t = first.times[j].time;
    for (int which = 0; which < 2; ++which) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      bool finite = true;
      std::string detail;
      for (const auto& s : by_size) {
        const TimeSummary& ts = s.at(t);
        const double v = which == 0 ? ts.xi_l1_squared.mean : ts.xi_weighted.mean;
        finite = finite && std::isfinite(v);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        detail += "n=" + std::to_string(s.n) + ":" + std::to_string(v) + " ";
      }
      const double ratio = hi == 0.0 ? 1.0 : (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
      Check c;
      c.name = std::string(which == 0 ? "E||xi||_1^2" : "E||xi||_{1,1}") + "(t=" + std::to_string(t) + ")";
      c.observed = ratio;
      c.bound = factor;
      c.passed = finite && ratio <= factor;
      c.detail = detail;
      r.checks.push_back(std::move(c));
    }
  }
  return r;
}

}  // namespace coag
