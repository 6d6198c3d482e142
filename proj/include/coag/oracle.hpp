#pragma once

// Exact law of the lumped chain for small n: states are the integer
// partitions of n, the generator is a dense rate matrix, and transient
// distributions come from uniformization.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "coag/kernel.hpp"
#include "coag/state.hpp"

namespace coag {

/// Parts in decreasing order.
using Partition = std::vector<mass_t>;

/// All partitions of n, parts in decreasing order, listed in increasing
/// lexicographic order (1+1+...+1 first, n last).
inline std::vector<Partition> partitions(mass_t n) {
  if (n < 1) throw std::invalid_argument("partitions: n must be >= 1");
  std::vector<Partition> out;
  Partition current;
  std::function<void(mass_t, mass_t)> rec = [&](mass_t remaining, mass_t max_part) {
    if (remaining == 0) {
      out.push_back(current);
      return;
    }
    for (mass_t p = std::min(remaining, max_part); p >= 1; --p) {
      current.push_back(p);
      rec(remaining - p, p);
      current.pop_back();
    }
  };
  rec(n, n);
  std::sort(out.begin(), out.end());
  return out;
}

class PartitionChain {
 public:
  static constexpr mass_t max_n = 12;

  PartitionChain(mass_t n, const Kernel& k) : n_(n) {
    if (n < 1 || n > max_n) {
      throw std::invalid_argument("oracle: n = " + std::to_string(n) + " outside [1, " + std::to_string(max_n) + "]");
    }
    states_ = partitions(n);
    for (std::size_t s = 0; s < states_.size(); ++s) index_.emplace(states_[s], s);
    const std::size_t m = states_.size();
    generator_.assign(m * m, 0.0);
    for (std::size_t s = 0; s < m; ++s) {
      const auto counts = counts_of(states_[s]);
      double exit = 0.0;
      for (auto it = counts.begin(); it != counts.end(); ++it) {
        for (auto jt = it; jt != counts.end(); ++jt) {
          const mass_t a = it->first;
          const mass_t b = jt->first;
          const double na = static_cast<double>(it->second);
          const double nb = static_cast<double>(jt->second);
          const double rate = a == b ? k(a, a) * na * (na - 1.0) / static_cast<double>(n)
                                     : 2.0 * k(a, b) * na * nb / static_cast<double>(n);
          if (rate <= 0.0) continue;
          Partition next = states_[s];
          next.erase(std::find(next.begin(), next.end(), a));
          next.erase(std::find(next.begin(), next.end(), b));
          next.push_back(a + b);
          std::sort(next.begin(), next.end(), std::greater<>());
          generator_[s * m + index_.at(next)] += rate;
          exit += rate;
        }
      }
      generator_[s * m + s] -= exit;
    }
  }

  mass_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return states_.size(); }
  const std::vector<Partition>& states() const noexcept { return states_; }
  const Partition& state(std::size_t s) const { return states_.at(s); }
  std::size_t index_of(Partition p) const {
    std::sort(p.begin(), p.end(), std::greater<>());
    return index_.at(p);
  }
  std::size_t monodisperse_index() const { return 0; }
  double rate(std::size_t from, std::size_t to) const { return generator_.at(from * size() + to); }

  static std::map<mass_t, count_t> counts_of(const Partition& p) {
    std::map<mass_t, count_t> c;
    for (mass_t part : p) ++c[part];
    return c;
  }

  MassHistogram histogram(std::size_t s) const { return MassHistogram::from_counts(n_, counts_of(states_.at(s))); }

  /// Law at time t started from `initial` (defaults to the monodisperse
  /// state); uniformization with Poisson tail below 1e-13 per chunk.
  std::vector<double> distribution(double t, std::size_t initial = 0) const {
    if (t < 0.0) throw std::invalid_argument("oracle: t must be >= 0");
    const std::size_t m = size();
    std::vector<double> p(m, 0.0);
    p.at(initial) = 1.0;
    double lambda = 0.0;
    for (std::size_t s = 0; s < m; ++s) lambda = std::max(lambda, -generator_[s * m + s]);
    if (t == 0.0 || lambda == 0.0) return p;
    // Chunks keep lambda * dt moderate so e^{-lambda dt} stays well scaled.
    const auto chunks = static_cast<std::size_t>(std::ceil(lambda * t / 20.0));
    const double dt = t / static_cast<double>(chunks);
    for (std::size_t c = 0; c < chunks; ++c) p = uniformized_step(p, lambda, dt);
    return p;
  }

  /// E[observable(state at t)].
  double expectation(double t, const std::function<double(const MassHistogram&)>& observable,
                     std::size_t initial = 0) const {
    const auto p = distribution(t, initial);
    double e = 0.0;
    for (std::size_t s = 0; s < size(); ++s) {
      if (p[s] != 0.0) e += p[s] * observable(histogram(s));
    }
    return e;
  }

 private:
  std::vector<double> uniformized_step(const std::vector<double>& p0, double lambda, double dt) const {
    const std::size_t m = size();
    const double x = lambda * dt;
    std::vector<double> term = p0, next(m), out(m, 0.0);
    double weight = std::exp(-x);
    double cumulative = 0.0;
    for (std::size_t k = 0;; ++k) {
      for (std::size_t s = 0; s < m; ++s) out[s] += weight * term[s];
      cumulative += weight;
      if (1.0 - cumulative < 1e-13 && static_cast<double>(k) > x) break;
      if (k > 10000) throw std::runtime_error("oracle: uniformization did not converge");
      // term <- term * (I + G / lambda)
      for (std::size_t j = 0; j < m; ++j) {
        double acc = term[j];
        for (std::size_t i = 0; i < m; ++i) acc += term[i] * generator_[i * m + j] / lambda;
        next[j] = acc;
      }
      term.swap(next);
      weight *= x / static_cast<double>(k + 1);
    }
    return out;
  }

  mass_t n_;
  std::vector<Partition> states_;
  std::map<Partition, std::size_t> index_;
  std::vector<double> generator_;  // row-major, rows sum to 0
};

inline PartitionChain build_chain(mass_t n, const Kernel& k) { return PartitionChain(n, k); }

// Observables for exact_expectations.
namespace observable {

inline std::function<double(const MassHistogram&)> count(mass_t l) {
  return [l](const MassHistogram& h) { return static_cast<double>(h.count(l)); };
}

inline std::function<double(const MassHistogram&)> density(mass_t l) {
  return [l](const MassHistogram& h) { return static_cast<double>(h.count(l)) / static_cast<double>(h.n()); };
}

inline std::function<double(const MassHistogram&)> moment(int p) {
  return [p](const MassHistogram& h) { return h.moment(p); };
}

inline std::function<double(const MassHistogram&)> product(std::function<double(const MassHistogram&)> a,
                                                            std::function<double(const MassHistogram&)> b) {
  return [a = std::move(a), b = std::move(b)](const MassHistogram& h) { return a(h) * b(h); };
}

}  // namespace observable

inline double exact_expectations(const PartitionChain& chain, double t,
                                 const std::function<double(const MassHistogram&)>& obs) {
  return chain.expectation(t, obs);
}

}  // namespace coag
