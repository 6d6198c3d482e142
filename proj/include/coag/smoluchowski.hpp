#pragma once

// Deterministic layer: the coagulation operator, its finite-n correction, a
// truncated RK4 integrator for the Smoluchowski system, and the closed-form
// monodisperse solution for a constant kernel.
//
// Convention throughout: (K u)_l = sum_{i<l} K(i,l-i) u_i u_{l-i}
//                                  - 2 sum_i K(l,i) u_l u_i.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coag/kernel.hpp"
#include "coag/state.hpp"

namespace coag {

/// (K u)_l for l = 1..L; the loss sum runs over i <= L.
inline std::vector<double> apply_K(const Kernel& k, std::span<const double> u) {
  const auto L = static_cast<mass_t>(u.size());
  std::vector<double> out(u.size(), 0.0);
  for (mass_t i = 1; i <= L; ++i) {
    const double ui = u[static_cast<std::size_t>(i - 1)];
    if (ui == 0.0) continue;
    for (mass_t j = 1; j <= L; ++j) {
      const double w = k(i, j) * ui * u[static_cast<std::size_t>(j - 1)];
      if (i + j <= L) out[static_cast<std::size_t>(i + j - 1)] += w;
      out[static_cast<std::size_t>(i - 1)] -= 2.0 * w;
    }
  }
  return out;
}

inline std::vector<double> apply_K(const Kernel& k, const DensityVector& u) { return apply_K(k, u.values); }

/// (R u)_l = 2 K(l,l) u_l - K(l/2,l/2) u_{l/2}, the half-mass term being
/// absent for odd l.
inline std::vector<double> apply_R(const Kernel& k, std::span<const double> u) {
  const auto L = static_cast<mass_t>(u.size());
  std::vector<double> out(u.size(), 0.0);
  for (mass_t l = 1; l <= L; ++l) {
    double r = 2.0 * k(l, l) * u[static_cast<std::size_t>(l - 1)];
    if (l % 2 == 0) r -= k(l / 2, l / 2) * u[static_cast<std::size_t>(l / 2 - 1)];
    out[static_cast<std::size_t>(l - 1)] = r;
  }
  return out;
}

inline std::vector<double> apply_R(const Kernel& k, const DensityVector& u) { return apply_R(k, u.values); }

/// Monodisperse solution for K = c: (ct)^{l-1} / (1+ct)^{l+1}.
inline double constant_kernel_exact(mass_t l, double t, double c) {
  if (l < 1) throw std::invalid_argument("constant_kernel_exact: l must be >= 1");
  if (t < 0.0) throw std::invalid_argument("constant_kernel_exact: t must be >= 0");
  const double x = c * t;
  return std::pow(x, static_cast<double>(l - 1)) / std::pow(1.0 + x, static_cast<double>(l + 1));
}

inline DensityVector constant_kernel_density(std::size_t truncation, double t, double c) {
  DensityVector d(truncation);
  for (std::size_t i = 0; i < truncation; ++i) d.values[i] = constant_kernel_exact(static_cast<mass_t>(i + 1), t, c);
  // Closed-form tails: number 1/(1+ct), mass 1.
  d.leaked_number = std::max(0.0, 1.0 / (1.0 + c * t) - d.number());
  d.leaked_mass = std::max(0.0, 1.0 - d.mass());
  return d;
}

struct SolverConfig {
  double dt = 1e-3;    // fixed step, or the initial step when adaptive
  double atol = 0.0;   // > 0 selects step-doubling adaptive control
  double horizon = 1.0;
  std::vector<double> grid{1.0};  // output times, increasing, within [0, horizon]

  bool adaptive() const noexcept { return atol > 0.0; }

  static double stability_bound(const Kernel& k) {
    return k.sup_norm() > 0.0 ? 1.0 / (6.0 * k.sup_norm()) : 1.0;
  }

  void validate(const Kernel& k) const {
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("solver: horizon must be >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("solver: dt must be > 0");
    if (!adaptive() && dt > stability_bound(k) * (1.0 + 1e-12)) {
      throw std::invalid_argument("solver: dt = " + std::to_string(dt) + " exceeds the stability bound 1/(6 sup K) = " +
                                  std::to_string(stability_bound(k)));
    }
    if (adaptive() && atol > 1e-6) throw std::invalid_argument("solver: atol must lie in (0, 1e-6]");
    if (atol < 0.0) throw std::invalid_argument("solver: atol must be >= 0");
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (!(grid[j] >= 0.0) || grid[j] > horizon) {
        throw std::invalid_argument("solver: grid time " + std::to_string(grid[j]) + " outside [0, T]");
      }
      if (j > 0 && grid[j] <= grid[j - 1]) throw std::invalid_argument("solver: grid must be strictly increasing");
    }
  }
};

/// Solution sampled on a time grid.
struct DeterministicTrajectory {
  std::vector<double> times;
  std::vector<DensityVector> states;
  std::size_t steps = 0;  // accepted integration steps

  std::size_t truncation() const { return states.empty() ? 0 : states.front().truncation(); }
  double horizon() const { return times.empty() ? 0.0 : times.back(); }

  /// Linear interpolation between grid points; exact at grid points.
  DensityVector at(double t) const {
    if (times.empty()) throw std::logic_error("trajectory: empty");
    const double slack = 1e-12 * std::max(1.0, std::abs(times.back()));
    if (t < times.front() - slack || t > times.back() + slack) {
      throw std::out_of_range("trajectory: t = " + std::to_string(t) + " outside [" + std::to_string(times.front()) +
                              ", " + std::to_string(times.back()) + "]");
    }
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end()) return states.back();
    auto hi = static_cast<std::size_t>(it - times.begin());
    if (*it == t || hi == 0) return states[hi];
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    DensityVector d(truncation());
    const auto& a = states[lo];
    const auto& b = states[hi];
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = (1.0 - w) * a.values[i] + w * b.values[i];
    d.leaked_number = (1.0 - w) * a.leaked_number + w * b.leaked_number;
    d.leaked_mass = (1.0 - w) * a.leaked_mass + w * b.leaked_mass;
    return d;
  }
};

namespace detail {

// y = (u_1..u_L, leaked_number, leaked_mass). Pairs whose merged mass
// exceeds L leave the truncated system and are booked into the tail.
inline void smoluchowski_rhs(const Kernel& k, const std::vector<double>& y, std::vector<double>& dy) {
  const std::size_t L = y.size() - 2;
  std::fill(dy.begin(), dy.end(), 0.0);
  double tail_number = 0.0, tail_mass = 0.0;
  for (std::size_t i = 1; i <= L; ++i) {
    const double ui = y[i - 1];
    if (ui == 0.0) continue;
    double loss = 0.0;
    for (std::size_t j = 1; j <= L; ++j) {
      const double w = k(static_cast<mass_t>(i), static_cast<mass_t>(j)) * ui * y[j - 1];
      loss += w;
      if (i + j <= L) {
        dy[i + j - 1] += w;
      } else {
        tail_number += w;
        tail_mass += static_cast<double>(i + j) * w;
      }
    }
    dy[i - 1] -= 2.0 * loss;
  }
  dy[L] = tail_number;
  dy[L + 1] = tail_mass;
}

inline void rk4_step(const Kernel& k, std::vector<double>& y, double h, std::vector<double> (&work)[5]) {
  auto& k1 = work[0];
  auto& k2 = work[1];
  auto& k3 = work[2];
  auto& k4 = work[3];
  auto& tmp = work[4];
  const std::size_t m = y.size();
  smoluchowski_rhs(k, y, k1);
  for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  smoluchowski_rhs(k, tmp, k2);
  for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  smoluchowski_rhs(k, tmp, k3);
  for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + h * k3[i];
  smoluchowski_rhs(k, tmp, k4);
  for (std::size_t i = 0; i < m; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

inline void clamp_state(std::vector<double>& y) {
  for (std::size_t i = 0; i + 2 < y.size(); ++i) {
    if (y[i] < 0.0 && y[i] > -DensityVector::negative_tolerance) y[i] = 0.0;
  }
}

inline DensityVector unpack(const std::vector<double>& y) {
  DensityVector d(y.size() - 2);
  std::copy(y.begin(), y.end() - 2, d.values.begin());
  d.leaked_number = y[y.size() - 2];
  d.leaked_mass = y.back();
  return d;
}

}  // namespace detail

/// Integrates du/dt = K u on {1..L} from u0, recording u at cfg.grid.
inline DeterministicTrajectory solve(const Kernel& k, const DensityVector& u0, const SolverConfig& cfg) {
  cfg.validate(k);
  if (u0.truncation() < 1) throw std::invalid_argument("solver: empty initial condition");
  if (!u0.is_subprobability(1e-9)) throw std::invalid_argument("solver: initial condition is not in M_+");

  std::vector<double> y(u0.values);
  y.push_back(u0.leaked_number);
  y.push_back(u0.leaked_mass);
  std::vector<double> work[5];
  for (auto& w : work) w.assign(y.size(), 0.0);

  DeterministicTrajectory out;
  out.times.reserve(cfg.grid.size());
  out.states.reserve(cfg.grid.size());
  double t = 0.0;
  double h = cfg.adaptive() ? std::min(cfg.dt, SolverConfig::stability_bound(k)) : cfg.dt;
  std::vector<double> big, half;

  for (double target : cfg.grid) {
    while (t < target) {
      const double remaining = target - t;
      // Avoid a sliver step from floating accumulation of t.
      const bool last = remaining <= h * (1.0 + 1e-9);
      double step = last ? remaining : h;
      if (!cfg.adaptive()) {
        detail::rk4_step(k, y, step, work);
        t = last ? target : t + step;
        ++out.steps;
      } else {
        big = y;
        detail::rk4_step(k, big, step, work);
        half = y;
        detail::rk4_step(k, half, 0.5 * step, work);
        detail::rk4_step(k, half, 0.5 * step, work);
        double err = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) err = std::max(err, std::abs(half[i] - big[i]));
        err /= 15.0;
        const bool accepted = err <= cfg.atol;
        if (accepted) {
          // Richardson-extrapolated local solution.
          for (std::size_t i = 0; i < y.size(); ++i) y[i] = half[i] + (half[i] - big[i]) / 15.0;
          t = last ? target : t + step;
          ++out.steps;
        }
        const double factor = err > 0.0 ? 0.9 * std::pow(cfg.atol / err, 0.2) : 2.0;
        const double proposal = std::min(step * std::clamp(factor, 0.2, 2.0), 2.0 * SolverConfig::stability_bound(k));
        // A shortened final step says nothing about the step size to keep.
        h = accepted && last ? std::max(h, proposal) : proposal;
      }
      detail::clamp_state(y);
    }
    out.times.push_back(target);
    out.states.push_back(detail::unpack(y));
  }
  return out;
}

/// n + 1 equally spaced times 0, T/n, ..., T.
inline std::vector<double> uniform_grid(double horizon, std::size_t intervals) {
  std::vector<double> g(intervals + 1);
  for (std::size_t j = 0; j <= intervals; ++j) g[j] = horizon * static_cast<double>(j) / static_cast<double>(intervals);
  if (horizon == 0.0) g.resize(1);
  return g;
}

}  // namespace coag
