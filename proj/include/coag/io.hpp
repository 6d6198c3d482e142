#pragma once

// CSV and JSON serialization of simulation, solver and fluctuation outputs,
// and crash-safe file writes.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coag/analysis.hpp"
#include "coag/fluctuation.hpp"
#include "coag/simulator.hpp"
#include "coag/smoluchowski.hpp"
#include "coag/state.hpp"

namespace coag {

inline constexpr const char* version = "0.1.0";

/// Shortest round-trip decimal form of a double.
inline std::string format_number(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline void to_json(nlohmann::json& j, const DensityVector& d) {
  j = {{"L", d.truncation()}, {"values", d.values}, {"leaked_number", d.leaked_number}, {"leaked_mass", d.leaked_mass}};
}

inline void to_json(nlohmann::json& j, const MassHistogram& h) {
  nlohmann::json counts = nlohmann::json::object();
  for (auto [mass, count] : h.sparse()) counts[std::to_string(mass)] = count;
  j = {{"n", h.n()}, {"counts", counts}};
}

inline MassHistogram histogram_from_json(const nlohmann::json& j) {
  std::map<mass_t, count_t> counts;
  for (const auto& [key, value] : j.at("counts").items()) counts[std::stoll(key)] = value.get<count_t>();
  return MassHistogram::from_counts(j.at("n").get<mass_t>(), counts);
}

inline DensityVector density_from_json(const nlohmann::json& j) {
  DensityVector d(j.at("L").get<std::size_t>());
  const auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != d.truncation()) throw std::invalid_argument("density json: values length differs from L");
  d.values = values;
  d.leaked_number = j.at("leaked_number").get<double>();
  d.leaked_mass = j.at("leaked_mass").get<double>();
  return d;
}

inline nlohmann::json kernel_to_json(const Kernel& k) {
  switch (k.kind()) {
    case KernelKind::constant:
      return {{"kind", "constant"}, {"c", k.rate_constant()}};
    case KernelKind::capped_brownian:
      return {{"kind", "capped-brownian"}, {"C0", k.rate_constant()}, {"B", k.cap()}};
    case KernelKind::lookup_table:
      return {{"kind", "lookup-table"}, {"dim", k.table_dim()}, {"table", k.table()}, {"default", k.rate_constant()}};
  }
  return {};
}

/// Long format `t,ell,pi,M,QV`; M and QV are empty when not tracked.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,ell,pi,M,QV\n";
  for (const auto& s : traj.snapshots) {
    for (std::size_t l = 0; l < s.density.truncation(); ++l) {
      os << format_number(s.time) << ',' << l + 1 << ',' << format_number(s.density.values[l]) << ',';
      if (!s.martingale.empty()) os << format_number(s.martingale[l]) << ',' << format_number(s.qv_integral[l]);
      else os << ',';
      os << '\n';
    }
  }
}

/// `t,ell,u`.
inline void write_solution_csv(std::ostream& os, const DeterministicTrajectory& traj) {
  os << "t,ell,u\n";
  for (std::size_t j = 0; j < traj.times.size(); ++j) {
    const auto& u = traj.states[j];
    for (std::size_t l = 0; l < u.truncation(); ++l) {
      os << format_number(traj.times[j]) << ',' << l + 1 << ',' << format_number(u.values[l]) << '\n';
    }
  }
}

/// `t,a,b,sigma`, upper triangle including the diagonal.
inline void write_covariance_csv(std::ostream& os, const std::vector<CovarianceMatrix>& sigmas) {
  os << "t,a,b,sigma\n";
  for (const auto& s : sigmas) {
    const auto L = static_cast<mass_t>(s.truncation());
    for (mass_t a = 1; a <= L; ++a) {
      for (mass_t b = a; b <= L; ++b) {
        os << format_number(s.time) << ',' << a << ',' << b << ',' << format_number(s(a, b)) << '\n';
      }
    }
  }
}

/// `t,ell,f` along the backward solve (t is the forward time s).
inline void write_dual_csv(std::ostream& os, const DualSolution& sol) {
  os << "t,ell,f\n";
  for (std::size_t j = 0; j < sol.s.size(); ++j) {
    for (std::size_t l = 0; l < sol.f[j].size(); ++l) {
      os << format_number(sol.s[j]) << ',' << l + 1 << ',' << format_number(sol.f[j][l]) << '\n';
    }
  }
}

/// Flat table of every ensemble curve:
/// `t,quantity,ell,mean,variance,standard_error,skewness,excess_kurtosis`.
inline void write_summary_csv(std::ostream& os, const EnsembleSummary& s) {
  os << "t,quantity,ell,mean,variance,standard_error,skewness,excess_kurtosis\n";
  auto row = [&](double t, const char* q, std::size_t ell, const PointStats& p) {
    os << format_number(t) << ',' << q << ',' << ell << ',' << format_number(p.mean) << ','
       << format_number(p.variance) << ',' << format_number(p.standard_error) << ',' << format_number(p.skewness) << ','
       << format_number(p.excess_kurtosis) << '\n';
  };
  for (const auto& ts : s.times) {
    for (std::size_t l = 0; l < ts.pi.size(); ++l) row(ts.time, "pi", l + 1, ts.pi[l]);
    for (std::size_t l = 0; l < ts.xi.size(); ++l) row(ts.time, "xi", l + 1, ts.xi[l]);
    for (std::size_t l = 0; l < ts.martingale.size(); ++l) row(ts.time, "M", l + 1, ts.martingale[l]);
    for (std::size_t l = 0; l < ts.qv.size(); ++l) row(ts.time, "QV", l + 1, ts.qv[l]);
    for (std::size_t p = 0; p < ts.moments.size(); ++p) row(ts.time, "moment", p, ts.moments[p]);
    if (!ts.xi.empty()) {
      row(ts.time, "xi_l1_squared", 0, ts.xi_l1_squared);
      row(ts.time, "xi_weighted_l1", 0, ts.xi_weighted);
      row(ts.time, "lln_error", 0, ts.lln_error);
    }
  }
}

/// Writes `content` to `path` through a temporary file and a rename, so a
/// reader never sees a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

template <class Writer>
void atomic_write_with(const std::filesystem::path& path, Writer&& writer) {
  std::ostringstream os;
  writer(os);
  atomic_write(path, os.str());
}

}  // namespace coag
