#pragma once

// Microscopic mass histograms, truncated densities and fluctuation vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coag/kernel.hpp"

namespace coag {

/// Counts N_l of particles per mass for a system of total mass n.
///
/// Sites are not stored: every observable of the chain depends on the
/// configuration only through these counts. Storage is dense over masses
/// 0..n; `sparse()` returns the nonzero entries.
class MassHistogram {
 public:
  MassHistogram() = default;

  static MassHistogram monodisperse(mass_t n) {
    if (n < 1) throw std::invalid_argument("histogram: n must be >= 1");
    MassHistogram h;
    h.n_ = n;
    h.counts_.assign(static_cast<std::size_t>(n + 1), 0);
    h.counts_[1] = n;
    h.particles_ = n;
    h.top_ = 1;
    return h;
  }

  /// Builds a histogram from sparse counts; requires sum of l * N_l == n.
  static MassHistogram from_counts(mass_t n, const std::map<mass_t, count_t>& counts) {
    if (n < 1) throw std::invalid_argument("histogram: n must be >= 1");
    MassHistogram h;
    h.n_ = n;
    h.counts_.assign(static_cast<std::size_t>(n + 1), 0);
    mass_t total = 0;
    for (auto [mass, count] : counts) {
      if (mass < 1 || mass > n) {
        throw std::invalid_argument("histogram: mass " + std::to_string(mass) + " outside [1, n]");
      }
      if (count < 0) throw std::invalid_argument("histogram: negative count");
      h.counts_[static_cast<std::size_t>(mass)] += count;
      h.particles_ += count;
      total += mass * count;
      if (count > 0) h.top_ = std::max(h.top_, mass);
    }
    if (total != n) {
      throw std::invalid_argument("histogram: total mass " + std::to_string(total) + " != n = " +
                                  std::to_string(n));
    }
    return h;
  }

  mass_t n() const noexcept { return n_; }
  count_t particle_count() const noexcept { return particles_; }
  /// Largest occupied mass.
  mass_t max_mass() const noexcept { return top_; }

  count_t count(mass_t mass) const noexcept {
    if (mass < 1 || mass > n_) return 0;
    return counts_[static_cast<std::size_t>(mass)];
  }

  /// Dense view indexed by mass (entry 0 is always 0).
  std::span<const count_t> dense() const noexcept { return counts_; }

  std::map<mass_t, count_t> sparse() const {
    std::map<mass_t, count_t> out;
    for (mass_t m = 1; m <= top_; ++m) {
      if (counts_[static_cast<std::size_t>(m)] != 0) out.emplace(m, counts_[static_cast<std::size_t>(m)]);
    }
    return out;
  }

  /// Sum of l * N_l, recomputed from scratch.
  mass_t total_mass() const noexcept {
    mass_t total = 0;
    for (mass_t m = 1; m <= top_; ++m) total += m * counts_[static_cast<std::size_t>(m)];
    return total;
  }

  /// Sum of l^p N_l / n over the full histogram.
  double moment(int p) const noexcept {
    double acc = 0.0;
    for (mass_t m = 1; m <= top_; ++m) {
      const count_t c = counts_[static_cast<std::size_t>(m)];
      if (c != 0) acc += std::pow(static_cast<double>(m), p) * static_cast<double>(c);
    }
    return acc / static_cast<double>(n_);
  }

  /// Replaces one particle of mass a and one of mass b by one of mass a + b.
  void merge(mass_t a, mass_t b) {
    if (a < 1 || b < 1 || a + b > n_) throw std::logic_error("histogram: invalid merge");
    auto& ca = counts_[static_cast<std::size_t>(a)];
    auto& cb = counts_[static_cast<std::size_t>(b)];
    if (a == b ? ca < 2 : (ca < 1 || cb < 1)) throw std::logic_error("histogram: merge of absent particles");
    --ca;
    --cb;
    ++counts_[static_cast<std::size_t>(a + b)];
    --particles_;
    top_ = std::max(top_, a + b);
  }

  friend bool operator==(const MassHistogram&, const MassHistogram&) = default;

 private:
  mass_t n_ = 0;
  std::vector<count_t> counts_;
  count_t particles_ = 0;
  mass_t top_ = 0;
};

/// Subprobability vector truncated at L, with the number and mass that lie
/// beyond the truncation kept explicitly.
struct DensityVector {
  static constexpr double negative_tolerance = 1e-12;

  std::vector<double> values;  // values[l - 1] = u_l
  double leaked_number = 0.0;
  double leaked_mass = 0.0;

  DensityVector() = default;
  explicit DensityVector(std::size_t truncation) : values(truncation, 0.0) {}

  static DensityVector delta_one(std::size_t truncation) {
    if (truncation < 1) throw std::invalid_argument("density: truncation must be >= 1");
    DensityVector d(truncation);
    d.values[0] = 1.0;
    return d;
  }

  std::size_t truncation() const noexcept { return values.size(); }
  double operator[](mass_t l) const { return values[static_cast<std::size_t>(l - 1)]; }
  double& operator[](mass_t l) { return values[static_cast<std::size_t>(l - 1)]; }

  double number() const noexcept {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }

  double mass() const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += static_cast<double>(i + 1) * values[i];
    return s;
  }

  /// Sets entries in (-negative_tolerance, 0) to zero. Returns false if any
  /// entry is below -negative_tolerance.
  bool clamp_negatives() noexcept {
    bool ok = true;
    for (double& v : values) {
      if (v < 0.0) {
        if (v > -negative_tolerance) v = 0.0;
        else ok = false;
      }
    }
    return ok;
  }

  /// Membership in M_+ up to `tol`.
  bool is_subprobability(double tol = 1e-12) const noexcept {
    for (double v : values) {
      if (v < -negative_tolerance) return false;
    }
    return number() + leaked_number <= 1.0 + tol && mass() + leaked_mass <= 1.0 + tol;
  }
};

/// Signed vector xi = sqrt(n) (pi - u) on {1..L}.
struct FluctuationVector {
  std::vector<double> values;

  FluctuationVector() = default;
  explicit FluctuationVector(std::size_t truncation) : values(truncation, 0.0) {}

  std::size_t truncation() const noexcept { return values.size(); }
  double operator[](mass_t l) const { return values[static_cast<std::size_t>(l - 1)]; }
  double& operator[](mass_t l) { return values[static_cast<std::size_t>(l - 1)]; }
};

inline DensityVector histogram_to_density(const MassHistogram& h, std::size_t truncation) {
  if (truncation < 1) throw std::invalid_argument("density: truncation must be >= 1");
  DensityVector d(truncation);
  const double n = static_cast<double>(h.n());
  const auto counts = h.dense();
  count_t tail_number = 0;
  mass_t tail_mass = 0;
  for (mass_t m = 1; m <= h.max_mass(); ++m) {
    const count_t c = counts[static_cast<std::size_t>(m)];
    if (c == 0) continue;
    if (static_cast<std::size_t>(m) <= truncation) {
      d[m] = static_cast<double>(c) / n;
    } else {
      tail_number += c;
      tail_mass += m * c;
    }
  }
  d.leaked_number = static_cast<double>(tail_number) / n;
  d.leaked_mass = static_cast<double>(tail_mass) / n;
  return d;
}

inline FluctuationVector fluctuation(const DensityVector& pi, const DensityVector& u, mass_t n) {
  if (pi.truncation() != u.truncation()) {
    throw std::invalid_argument("fluctuation: truncation mismatch (" + std::to_string(pi.truncation()) +
                                " vs " + std::to_string(u.truncation()) + ")");
  }
  const double scale = std::sqrt(static_cast<double>(n));
  FluctuationVector xi(pi.truncation());
  for (std::size_t i = 0; i < pi.values.size(); ++i) xi.values[i] = scale * (pi.values[i] - u.values[i]);
  return xi;
}

// Norms on finite sequences indexed from l = 1.

inline double norm_l1(std::span<const double> v) noexcept {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

/// sum of l |v_l|
inline double norm_l1_weighted(std::span<const double> v) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += static_cast<double>(i + 1) * std::abs(v[i]);
  return s;
}

inline double norm_sup(std::span<const double> v) noexcept {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

inline double norm_l1(const DensityVector& v) noexcept { return norm_l1(v.values); }
inline double norm_l1(const FluctuationVector& v) noexcept { return norm_l1(v.values); }
inline double norm_l1_weighted(const DensityVector& v) noexcept { return norm_l1_weighted(v.values); }
inline double norm_l1_weighted(const FluctuationVector& v) noexcept { return norm_l1_weighted(v.values); }
inline double norm_sup(const DensityVector& v) noexcept { return norm_sup(v.values); }
inline double norm_sup(const FluctuationVector& v) noexcept { return norm_sup(v.values); }

}  // namespace coag
