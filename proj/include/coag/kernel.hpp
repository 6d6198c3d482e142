#pragma once

// Bounded, symmetric coagulation kernels K(l, m) with K(0, .) = 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace coag {

using mass_t = std::int64_t;
using count_t = std::int64_t;

enum class KernelKind { constant, capped_brownian, lookup_table };

inline std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::constant: return "constant";
    case KernelKind::capped_brownian: return "capped-brownian";
    case KernelKind::lookup_table: return "lookup-table";
  }
  return "unknown";
}

/// Immutable coagulation kernel.
///
/// Values for masses up to `memo_ceiling` are tabulated at construction;
/// larger arguments are evaluated on demand. Copies share the table.
class Kernel {
 public:
  static constexpr mass_t default_memo_ceiling = 256;

  static Kernel constant(double c, mass_t memo_ceiling = default_memo_ceiling) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("constant kernel: rate c must be finite and >= 0");
    }
    Kernel k;
    k.kind_ = KernelKind::constant;
    k.c_ = c;
    k.sup_ = c;
    k.build_memo(memo_ceiling);
    return k;
  }

  /// min(C0 (l^{1/3} + m^{1/3}) (l^{-1/3} + m^{-1/3}), cap).
  ///
  /// The uncapped form grows like (max/min)^{1/3}, so for C0 > 0 the supremum
  /// over all masses is exactly `cap`.
  static Kernel capped_brownian(double c0, double cap, mass_t memo_ceiling = default_memo_ceiling) {
    if (!(c0 >= 0.0) || !std::isfinite(c0)) {
      throw std::invalid_argument("capped-brownian kernel: C0 must be finite and >= 0");
    }
    if (!(cap >= 0.0) || !std::isfinite(cap)) {
      throw std::invalid_argument("capped-brownian kernel: cap B must be finite and >= 0");
    }
    Kernel k;
    k.kind_ = KernelKind::capped_brownian;
    k.c_ = c0;
    k.cap_ = cap;
    k.sup_ = c0 > 0.0 ? cap : 0.0;
    k.build_memo(memo_ceiling);
    return k;
  }

  /// Dense table over masses 1..D (row-major, table[(l-1)*D + (m-1)]) and a
  /// default value for any pair outside it.
  static Kernel lookup_table(std::vector<double> table, mass_t dim, double default_value,
                             mass_t memo_ceiling = default_memo_ceiling) {
    if (dim < 0 || static_cast<std::size_t>(dim * dim) != table.size()) {
      throw std::invalid_argument("lookup-table kernel: table size must be dim*dim");
    }
    if (!(default_value >= 0.0) || !std::isfinite(default_value)) {
      throw std::invalid_argument("lookup-table kernel: default must be finite and >= 0");
    }
    // Pairs outside the table always exist, so the default is attained.
    double sup = default_value;
    for (mass_t l = 0; l < dim; ++l) {
      for (mass_t m = 0; m < dim; ++m) {
        const double v = table[static_cast<std::size_t>(l * dim + m)];
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw std::invalid_argument("lookup-table kernel: entries must be finite and >= 0");
        }
        if (v != table[static_cast<std::size_t>(m * dim + l)]) {
          throw std::invalid_argument("lookup-table kernel: table is not symmetric at (" +
                                      std::to_string(l + 1) + "," + std::to_string(m + 1) + ")");
        }
        sup = std::max(sup, v);
      }
    }
    Kernel k;
    k.kind_ = KernelKind::lookup_table;
    k.table_ = std::make_shared<const std::vector<double>>(std::move(table));
    k.dim_ = dim;
    k.c_ = default_value;
    k.sup_ = sup;
    k.build_memo(memo_ceiling);
    return k;
  }

  double operator()(mass_t l, mass_t m) const {
    if (l <= 0 || m <= 0) return 0.0;
    if (l <= ceiling_ && m <= ceiling_) {
      return (*memo_)[static_cast<std::size_t>(l * (ceiling_ + 1) + m)];
    }
    return compute(l, m);
  }

  double evaluate(mass_t l, mass_t m) const { return (*this)(l, m); }

  /// Exact supremum of K over all masses.
  double sup_norm() const noexcept { return sup_; }

  KernelKind kind() const noexcept { return kind_; }
  double rate_constant() const noexcept { return c_; }  // c, C0, or the table default
  double cap() const noexcept { return cap_; }
  mass_t table_dim() const noexcept { return dim_; }
  const std::vector<double>& table() const {
    static const std::vector<double> empty;
    return table_ ? *table_ : empty;
  }
  mass_t memo_ceiling() const noexcept { return ceiling_; }

 private:
  Kernel() = default;

  double compute(mass_t l, mass_t m) const {
    if (l <= 0 || m <= 0) return 0.0;
    switch (kind_) {
      case KernelKind::constant:
        return c_;
      case KernelKind::capped_brownian: {
        // Symmetric in (l, m) by construction: order the arguments first.
        const double a = std::cbrt(static_cast<double>(std::min(l, m)));
        const double b = std::cbrt(static_cast<double>(std::max(l, m)));
        return std::min(c_ * (a + b) * (1.0 / a + 1.0 / b), cap_);
      }
      case KernelKind::lookup_table:
        if (l <= dim_ && m <= dim_) return (*table_)[static_cast<std::size_t>((l - 1) * dim_ + (m - 1))];
        return c_;
    }
    return 0.0;
  }

  void build_memo(mass_t ceiling) {
    if (ceiling < 0) throw std::invalid_argument("kernel memo ceiling must be >= 0");
    ceiling_ = ceiling;
    auto memo = std::make_shared<std::vector<double>>(static_cast<std::size_t>((ceiling + 1) * (ceiling + 1)), 0.0);
    for (mass_t l = 1; l <= ceiling; ++l) {
      for (mass_t m = 1; m <= ceiling; ++m) {
        (*memo)[static_cast<std::size_t>(l * (ceiling + 1) + m)] = compute(l, m);
      }
    }
    memo_ = std::move(memo);
  }

  KernelKind kind_ = KernelKind::constant;
  double c_ = 0.0;
  double cap_ = std::numeric_limits<double>::infinity();
  double sup_ = 0.0;
  std::shared_ptr<const std::vector<double>> table_;
  mass_t dim_ = 0;
  mass_t ceiling_ = 0;
  std::shared_ptr<const std::vector<double>> memo_;
};

}  // namespace coag
