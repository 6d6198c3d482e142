#pragma once

// Gaussian fluctuation predictions: the linearized drift A(u, .), its dual
// A*(u, .), the noise form Q(u; f), and two independent routes to the
// covariance of the limiting linear SDE
//   d xi = A(u_t, xi) dt + Q(u_t)^{1/2} dB,   xi_0 = 0:
// the Lyapunov matrix ODE, and the backward dual equation per functional.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coag/kernel.hpp"
#include "coag/smoluchowski.hpp"
#include "coag/state.hpp"

namespace coag {

/// A(u,v)(l) = sum_{i<l} K(i,l-i) (u_i v_{l-i} + u_{l-i} v_i)
///             - 2 sum_i K(l,i) (u_l v_i + v_l u_i),   l = 1..L.
inline std::vector<double> apply_A(const Kernel& k, std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("apply_A: truncation mismatch");
  const auto L = static_cast<mass_t>(u.size());
  std::vector<double> out(u.size(), 0.0);
  for (mass_t i = 1; i <= L; ++i) {
    const double ui = u[static_cast<std::size_t>(i - 1)];
    const double vi = v[static_cast<std::size_t>(i - 1)];
    if (ui == 0.0 && vi == 0.0) continue;
    for (mass_t j = 1; j <= L; ++j) {
      const double kij = k(i, j);
      const double uj = u[static_cast<std::size_t>(j - 1)];
      const double vj = v[static_cast<std::size_t>(j - 1)];
      // Ordered pair (i, j): gain at i + j, loss at i.
      if (i + j <= L) out[static_cast<std::size_t>(i + j - 1)] += kij * ui * vj + kij * vi * uj;
      out[static_cast<std::size_t>(i - 1)] -= 2.0 * kij * (ui * vj + vi * uj);
    }
  }
  return out;
}

inline std::vector<double> apply_A(const Kernel& k, const DensityVector& u, const FluctuationVector& v) {
  return apply_A(k, u.values, v.values);
}

/// A*(u,f)(l) = 2 sum_i K(l,i) (f_{l+i} - f_l - f_i) u_i for l = 1..Lf, with
/// f taken as 0 beyond its length.
inline std::vector<double> apply_A_star(const Kernel& k, std::span<const double> u, std::span<const double> f) {
  const auto Lu = static_cast<mass_t>(u.size());
  const auto Lf = static_cast<mass_t>(f.size());
  auto F = [&](mass_t m) { return m <= Lf ? f[static_cast<std::size_t>(m - 1)] : 0.0; };
  std::vector<double> out(f.size(), 0.0);
  for (mass_t l = 1; l <= Lf; ++l) {
    const double fl = F(l);
    double acc = 0.0;
    for (mass_t i = 1; i <= Lu; ++i) {
      const double ui = u[static_cast<std::size_t>(i - 1)];
      if (ui == 0.0) continue;
      acc += k(l, i) * (F(l + i) - fl - F(i)) * ui;
    }
    out[static_cast<std::size_t>(l - 1)] = 2.0 * acc;
  }
  return out;
}

/// Q(u; f) = sum_{i,j} K(i,j) u_i u_j (f_{i+j} - f_i - f_j)^2 over i, j <= L,
/// with f taken as 0 beyond its length.
inline double q_form(const Kernel& k, std::span<const double> u, std::span<const double> f) {
  const auto Lu = static_cast<mass_t>(u.size());
  const auto Lf = static_cast<mass_t>(f.size());
  auto F = [&](mass_t m) { return m <= Lf ? f[static_cast<std::size_t>(m - 1)] : 0.0; };
  double q = 0.0;
  for (mass_t i = 1; i <= Lu; ++i) {
    const double ui = u[static_cast<std::size_t>(i - 1)];
    if (ui == 0.0) continue;
    for (mass_t j = 1; j <= Lu; ++j) {
      const double d = F(i + j) - F(i) - F(j);
      q += k(i, j) * ui * u[static_cast<std::size_t>(j - 1)] * d * d;
    }
  }
  return q;
}

/// Covariance (or rate) matrix on {1..L}, addressed with 1-based masses.
struct CovarianceMatrix {
  double time = 0.0;
  Eigen::MatrixXd values;

  CovarianceMatrix() = default;
  CovarianceMatrix(double t, Eigen::MatrixXd m) : time(t), values(std::move(m)) {}

  std::size_t truncation() const noexcept { return static_cast<std::size_t>(values.rows()); }
  double operator()(mass_t a, mass_t b) const { return values(a - 1, b - 1); }

  /// g^T Sigma g for g on {1..L} (shorter g is zero-padded).
  double quadratic(std::span<const double> g) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(values.rows());
    for (std::size_t i = 0; i < g.size() && i < static_cast<std::size_t>(v.size()); ++i) v[static_cast<Eigen::Index>(i)] = g[i];
    return v.dot(values * v);
  }
};

/// Coordinate form of Q: Q_ab(u) = sum_{i,j<=L} K(i,j) u_i u_j c_a(i,j) c_b(i,j)
/// with c_a(i,j) = 1(i+j=a) - 1(i=a) - 1(j=a), a, b <= L.
inline Eigen::MatrixXd q_matrix(const Kernel& k, std::span<const double> u, std::size_t truncation) {
  const auto L = static_cast<mass_t>(truncation);
  const auto Lu = static_cast<mass_t>(std::min(u.size(), truncation));
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(L, L);
  for (mass_t i = 1; i <= Lu; ++i) {
    const double ui = u[static_cast<std::size_t>(i - 1)];
    if (ui == 0.0) continue;
    for (mass_t j = 1; j <= Lu; ++j) {
      const double w = k(i, j) * ui * u[static_cast<std::size_t>(j - 1)];
      if (w == 0.0) continue;
      std::array<std::pair<mass_t, double>, 3> c{};
      std::size_t nc = 0;
      auto add = [&](mass_t a, double v) {
        if (a > L) return;
        for (std::size_t x = 0; x < nc; ++x) {
          if (c[x].first == a) {
            c[x].second += v;
            return;
          }
        }
        c[nc++] = {a, v};
      };
      add(i + j, 1.0);
      add(i, -1.0);
      add(j, -1.0);
      for (std::size_t x = 0; x < nc; ++x) {
        for (std::size_t y = 0; y < nc; ++y) {
          q(c[x].first - 1, c[y].first - 1) += w * c[x].second * c[y].second;
        }
      }
    }
  }
  return q;
}

/// Matrix of v -> A(u, v) on {1..L}.
inline Eigen::MatrixXd drift_matrix(const Kernel& k, std::span<const double> u, std::size_t truncation) {
  const auto L = static_cast<mass_t>(truncation);
  const auto Lu = static_cast<mass_t>(std::min(u.size(), truncation));
  auto U = [&](mass_t m) { return m <= Lu ? u[static_cast<std::size_t>(m - 1)] : 0.0; };
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(L, L);
  for (mass_t l = 1; l <= L; ++l) {
    double diag = 0.0;
    for (mass_t i = 1; i <= Lu; ++i) diag += k(l, i) * U(i);
    a(l - 1, l - 1) -= 2.0 * diag;
    const double ul = U(l);
    for (mass_t m = 1; m <= L; ++m) {
      if (m < l) a(l - 1, m - 1) += 2.0 * k(m, l - m) * U(l - m);
      a(l - 1, m - 1) -= 2.0 * k(l, m) * ul;
    }
  }
  return a;
}

struct FluctuationConfig {
  double step = 2e-3;  // RK4 step; stage times t, t + step/2, t + step
};

namespace detail {

inline void check_within(const DeterministicTrajectory& u_traj, double t, const char* who) {
  if (u_traj.times.empty()) throw std::invalid_argument(std::string(who) + ": empty deterministic trajectory");
  const double slack = 1e-12 * std::max(1.0, u_traj.horizon());
  if (t < -slack || t > u_traj.horizon() + slack || u_traj.times.front() > slack) {
    throw std::invalid_argument(std::string(who) + ": time " + std::to_string(t) +
                                " is not covered by the deterministic trajectory [" +
                                std::to_string(u_traj.times.front()) + ", " + std::to_string(u_traj.horizon()) + "]");
  }
}

}  // namespace detail

/// Sigma(t) for t in `grid` from dSigma/dt = A_t Sigma + Sigma A_t^T + Q(u_t),
/// Sigma(0) = 0, with A_t, Q(u_t) built on the truncation of `u_traj`.
/// Choosing the trajectory's spacing as step/2 makes every stage time a
/// grid point, so no interpolation error enters.
inline std::vector<CovarianceMatrix> covariance_lyapunov(const Kernel& k, const DeterministicTrajectory& u_traj,
                                                         const std::vector<double>& grid,
                                                         const FluctuationConfig& cfg = {}) {
  if (!(cfg.step > 0.0)) throw std::invalid_argument("covariance_lyapunov: step must be > 0");
  for (std::size_t j = 0; j < grid.size(); ++j) {
    detail::check_within(u_traj, grid[j], "covariance_lyapunov");
    if (j > 0 && grid[j] <= grid[j - 1]) throw std::invalid_argument("covariance_lyapunov: grid must be increasing");
  }
  const std::size_t L = u_traj.truncation();
  auto rhs = [&](double t, const Eigen::MatrixXd& s) -> Eigen::MatrixXd {
    const DensityVector u = u_traj.at(std::min(t, u_traj.horizon()));
    const Eigen::MatrixXd a = drift_matrix(k, u.values, L);
    Eigen::MatrixXd as = a * s;
    return as + as.transpose() + q_matrix(k, u.values, L);
  };

  std::vector<CovarianceMatrix> out;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L));
  double t = 0.0;
  for (double target : grid) {
    while (t < target) {
      const double remaining = target - t;
      const bool last = remaining <= cfg.step * (1.0 + 1e-9);
      const double h = last ? remaining : cfg.step;
      const Eigen::MatrixXd k1 = rhs(t, sigma);
      const Eigen::MatrixXd k2 = rhs(t + 0.5 * h, sigma + 0.5 * h * k1);
      const Eigen::MatrixXd k3 = rhs(t + 0.5 * h, sigma + 0.5 * h * k2);
      const Eigen::MatrixXd k4 = rhs(t + h, sigma + h * k3);
      sigma += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      sigma = 0.5 * (sigma + sigma.transpose()).eval();
      t = last ? target : t + h;
    }
    out.emplace_back(target, sigma);
  }
  return out;
}

/// Backward dual trajectory and the variance it predicts for <xi_t, g>.
struct DualSolution {
  double time = 0.0;                     // t
  std::vector<double> s;                 // decreasing from t to 0
  std::vector<std::vector<double>> f;    // f_s on {1..Lf}
  double variance = 0.0;                 // int_0^t Q(u_s, f_s) ds
  double mean = 0.0;                     // <xi_0, f_0> = 0
};

/// Solves d/ds f_s + A*(u_s, f_s) = 0 on [0, t] with f_t = g, f on {1..Lf}
/// (Lf = 0 selects twice the solver truncation), and integrates Q(u_s, f_s).
inline DualSolution dual_solve(const Kernel& k, std::span<const double> g, double t, const DeterministicTrajectory& u_traj,
                               std::size_t dual_truncation = 0, const FluctuationConfig& cfg = {}) {
  if (!(cfg.step > 0.0)) throw std::invalid_argument("dual_solve: step must be > 0");
  if (t < 0.0) throw std::invalid_argument("dual_solve: t must be >= 0");
  detail::check_within(u_traj, t, "dual_solve");
  const std::size_t Lf = dual_truncation == 0 ? 2 * u_traj.truncation() : dual_truncation;
  if (g.size() > Lf) throw std::invalid_argument("dual_solve: test function longer than the dual truncation");

  std::vector<double> f(Lf, 0.0);
  std::copy(g.begin(), g.end(), f.begin());

  // tau = t - s runs forward: df/dtau = A*(u_{t-tau}, f), dV/dtau = Q(u_{t-tau}; f).
  auto rhs = [&](double tau, const std::vector<double>& x, std::vector<double>& df) -> double {
    const DensityVector u = u_traj.at(std::max(0.0, t - tau));
    df = apply_A_star(k, u.values, x);
    return q_form(k, u.values, x);
  };

  DualSolution sol;
  sol.time = t;
  sol.s.push_back(t);
  sol.f.push_back(f);
  double tau = 0.0;
  double variance = 0.0;
  std::vector<double> k1, k2, k3, k4, tmp(Lf);
  while (tau < t) {
    const double remaining = t - tau;
    const bool last = remaining <= cfg.step * (1.0 + 1e-9);
    const double h = last ? remaining : cfg.step;
    const double q1 = rhs(tau, f, k1);
    for (std::size_t i = 0; i < Lf; ++i) tmp[i] = f[i] + 0.5 * h * k1[i];
    const double q2 = rhs(tau + 0.5 * h, tmp, k2);
    for (std::size_t i = 0; i < Lf; ++i) tmp[i] = f[i] + 0.5 * h * k2[i];
    const double q3 = rhs(tau + 0.5 * h, tmp, k3);
    for (std::size_t i = 0; i < Lf; ++i) tmp[i] = f[i] + h * k3[i];
    const double q4 = rhs(tau + h, tmp, k4);
    for (std::size_t i = 0; i < Lf; ++i) f[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    variance += h / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
    tau = last ? t : tau + h;
    sol.s.push_back(t - tau);
    sol.f.push_back(f);
  }
  sol.variance = variance;
  sol.mean = 0.0;
  return sol;
}

/// Indicator of a set of masses, as a test function on {1..max}.
inline std::vector<double> indicator(const std::vector<mass_t>& support) {
  mass_t top = 0;
  for (mass_t m : support) {
    if (m < 1) throw std::invalid_argument("indicator: masses must be >= 1");
    top = std::max(top, m);
  }
  std::vector<double> g(static_cast<std::size_t>(top), 0.0);
  for (mass_t m : support) g[static_cast<std::size_t>(m - 1)] = 1.0;
  return g;
}

}  // namespace coag
