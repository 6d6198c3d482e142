#pragma once

// Run configuration: a YAML key-value file plus command-line overrides.
// Every error names the line it comes from.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>
#include <json.hpp>

#include "coag/analysis.hpp"
#include "coag/fluctuation.hpp"
#include "coag/io.hpp"
#include "coag/kernel.hpp"
#include "coag/simulator.hpp"
#include "coag/smoluchowski.hpp"

namespace coag {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  CltTolerances clt;
  double route_relative = 1e-5;     // Lyapunov vs dual variance
  double qv_relative = 0.10;        // Var(M) vs E int n Gamma
  double oracle_standard_errors = 3.0;
  double moment_standard_errors = 3.0;
  double fluctuation_factor = 2.0;  // a priori curves across n
};

struct RunConfig {
  Kernel kernel = Kernel::constant(1.0);
  mass_t n = 1000;
  double horizon = 1.0;
  std::vector<double> grid{1.0};
  std::size_t truncation = 64;
  std::uint64_t replicas = 1;
  std::uint64_t master_seed = 1;
  Sampler sampler = Sampler::thinning;
  bool track_martingale = true;
  double dt = 1e-3;
  double atol = 0.0;
  double fluctuation_step = 2e-3;
  std::size_t dual_truncation = 0;
  std::vector<std::vector<mass_t>> functionals{{1}, {2}, {3}};
  std::vector<mass_t> observed{1, 2, 3};
  std::vector<std::pair<mass_t, mass_t>> covariance_pairs;
  std::vector<mass_t> sizes{100, 1000, 10000};  // a priori bound sweep
  Tolerances tolerances;
  // validate subcommand
  Kernel secondary_kernel = Kernel::capped_brownian(1.0, 10.0);
  double replica_scale = 1.0;
  // execution only: never affects results
  std::string output = "out";
  unsigned threads = 0;

  SimulationConfig simulation() const {
    SimulationConfig s;
    s.n = n;
    s.kernel = kernel;
    s.horizon = horizon;
    s.grid = grid;
    s.truncation = truncation;
    s.master_seed = master_seed;
    s.sampler = sampler;
    s.track_martingale = track_martingale;
    return s;
  }

  SolverConfig solver() const {
    SolverConfig s;
    s.dt = dt;
    s.atol = atol;
    s.horizon = horizon;
    s.grid = grid;
    return s;
  }
};

namespace detail {

inline std::string where(const YAML::Node& node, const std::string& source) {
  const auto mark = node.Mark();
  if (mark.line < 0) return source;
  return source + ":" + std::to_string(mark.line + 1);
}

template <class T>
T scalar(const YAML::Node& node, const std::string& key, const std::string& source) {
  if (!node.IsScalar()) throw ConfigError(where(node, source) + ": '" + key + "' must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where(node, source) + ": '" + key + "' has an invalid value '" + node.Scalar() + "'");
  }
}

template <class T>
std::vector<T> sequence(const YAML::Node& node, const std::string& key, const std::string& source) {
  if (!node.IsSequence()) throw ConfigError(where(node, source) + ": '" + key + "' must be a list");
  std::vector<T> out;
  for (const auto& item : node) out.push_back(scalar<T>(item, key, source));
  return out;
}

inline void reject_unknown(const YAML::Node& map, const std::set<std::string>& known, const std::string& section,
                           const std::string& source) {
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!known.contains(key)) {
      throw ConfigError(where(kv.first, source) + ": unknown key '" + key + "'" +
                        (section.empty() ? "" : " in '" + section + "'"));
    }
  }
}

inline Kernel parse_kernel(const YAML::Node& node, const std::string& key, const std::string& source) {
  if (!node.IsMap()) throw ConfigError(where(node, source) + ": '" + key + "' must be a mapping with a 'kind'");
  if (!node["kind"]) throw ConfigError(where(node, source) + ": '" + key + "' needs a 'kind'");
  const auto kind = scalar<std::string>(node["kind"], "kind", source);
  try {
    if (kind == "constant") {
      reject_unknown(node, {"kind", "c"}, key, source);
      return Kernel::constant(node["c"] ? scalar<double>(node["c"], "c", source) : 1.0);
    }
    if (kind == "capped-brownian") {
      reject_unknown(node, {"kind", "C0", "B"}, key, source);
      if (!node["B"]) throw ConfigError(where(node, source) + ": capped-brownian kernel needs a cap 'B'");
      return Kernel::capped_brownian(node["C0"] ? scalar<double>(node["C0"], "C0", source) : 1.0,
                                     scalar<double>(node["B"], "B", source));
    }
    if (kind == "lookup-table") {
      reject_unknown(node, {"kind", "table", "default"}, key, source);
      if (!node["table"] || !node["table"].IsSequence()) {
        throw ConfigError(where(node, source) + ": lookup-table kernel needs 'table' as a list of rows");
      }
      const YAML::Node rows = node["table"];
      const auto dim = static_cast<mass_t>(rows.size());
      std::vector<double> flat;
      for (const auto& row : rows) {
        const auto values = sequence<double>(row, "table", source);
        if (static_cast<mass_t>(values.size()) != dim) {
          throw ConfigError(where(row, source) + ": lookup-table rows must have " + std::to_string(dim) + " entries");
        }
        flat.insert(flat.end(), values.begin(), values.end());
      }
      return Kernel::lookup_table(std::move(flat), dim,
                                  node["default"] ? scalar<double>(node["default"], "default", source) : 0.0);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where(node, source) + ": " + e.what());
  }
  throw ConfigError(where(node["kind"], source) + ": unknown kernel kind '" + kind +
                    "' (expected constant, capped-brownian or lookup-table)");
}

inline std::pair<mass_t, mass_t> parse_pair(const YAML::Node& node, const std::string& source) {
  const auto v = sequence<mass_t>(node, "covariance_pairs", source);
  if (v.size() != 2) throw ConfigError(where(node, source) + ": covariance pair must have two masses");
  return {v[0], v[1]};
}

}  // namespace detail

/// Applies `key=value` overrides (dotted keys reach nested mappings) to a
/// parsed document. Values are parsed as YAML.
inline void apply_overrides(YAML::Node& root, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set " + o + ": expected key=value");
    const std::string path = o.substr(0, eq);
    YAML::Node value;
    try {
      value = YAML::Load(o.substr(eq + 1));
    } catch (const YAML::Exception& e) {
      throw ConfigError("--set " + o + ": " + e.msg);
    }
    std::vector<std::string> keys;
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) keys.push_back(part);
    // yaml-cpp nodes are handles, so walking with copies edits the tree.
    std::vector<YAML::Node> chain{root};
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
      YAML::Node next = chain.back()[keys[i]];
      if (!next.IsDefined() || next.IsNull()) {
        chain.back()[keys[i]] = YAML::Node(YAML::NodeType::Map);
        next = chain.back()[keys[i]];
      }
      if (!next.IsMap()) throw ConfigError("--set " + o + ": '" + keys[i] + "' is not a mapping");
      chain.push_back(next);
    }
    chain.back()[keys.back()] = value;
  }
}

/// Builds and validates a RunConfig from a YAML document.
inline RunConfig parse_config(const YAML::Node& root, const std::string& source) {
  RunConfig c;
  if (!root.IsDefined() || root.IsNull()) return c;
  if (!root.IsMap()) throw ConfigError(source + ": top level must be a mapping");
  using namespace detail;
  reject_unknown(root,
                 {"kernel", "n", "T", "grid", "grid_intervals", "L", "replicas", "master_seed", "sampler",
                  "track_martingale", "solver", "fluctuation", "observed", "covariance_pairs", "sizes", "tolerances",
                  "validate", "output", "threads"},
                 "", source);

  if (root["kernel"]) c.kernel = parse_kernel(root["kernel"], "kernel", source);
  if (root["n"]) {
    c.n = scalar<mass_t>(root["n"], "n", source);
    if (c.n < 1) throw ConfigError(where(root["n"], source) + ": n must be >= 1");
  }
  if (root["T"]) {
    c.horizon = scalar<double>(root["T"], "T", source);
    if (!(c.horizon >= 0.0) || !std::isfinite(c.horizon)) {
      throw ConfigError(where(root["T"], source) + ": T must be finite and >= 0");
    }
  }
  if (root["grid"] && root["grid_intervals"]) {
    throw ConfigError(where(root["grid_intervals"], source) + ": give either 'grid' or 'grid_intervals', not both");
  }
  if (root["grid"]) {
    c.grid = sequence<double>(root["grid"], "grid", source);
    if (c.grid.empty()) throw ConfigError(where(root["grid"], source) + ": grid must not be empty");
    for (std::size_t j = 0; j < c.grid.size(); ++j) {
      if (!(c.grid[j] >= 0.0) || c.grid[j] > c.horizon) {
        throw ConfigError(where(root["grid"][j], source) + ": grid time " + format_number(c.grid[j]) +
                          " outside [0, T]");
      }
      if (j > 0 && c.grid[j] <= c.grid[j - 1]) {
        throw ConfigError(where(root["grid"][j], source) + ": grid must be strictly increasing");
      }
    }
  } else if (root["grid_intervals"]) {
    const auto k = scalar<std::int64_t>(root["grid_intervals"], "grid_intervals", source);
    if (k < 1) throw ConfigError(where(root["grid_intervals"], source) + ": grid_intervals must be >= 1");
    c.grid = uniform_grid(c.horizon, static_cast<std::size_t>(k));
  } else {
    c.grid = {c.horizon};
  }
  if (root["L"]) {
    const auto L = scalar<std::int64_t>(root["L"], "L", source);
    if (L < 1) throw ConfigError(where(root["L"], source) + ": L must be >= 1");
    c.truncation = static_cast<std::size_t>(L);
  }
  if (root["replicas"]) {
    const auto r = scalar<std::int64_t>(root["replicas"], "replicas", source);
    if (r < 1) throw ConfigError(where(root["replicas"], source) + ": replicas must be >= 1");
    c.replicas = static_cast<std::uint64_t>(r);
  }
  if (root["master_seed"]) c.master_seed = scalar<std::uint64_t>(root["master_seed"], "master_seed", source);
  if (root["sampler"]) {
    try {
      c.sampler = parse_sampler(scalar<std::string>(root["sampler"], "sampler", source));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where(root["sampler"], source) + ": " + e.what());
    }
  }
  if (root["track_martingale"]) c.track_martingale = scalar<bool>(root["track_martingale"], "track_martingale", source);

  if (const YAML::Node s = root["solver"]) {
    if (!s.IsMap()) throw ConfigError(where(s, source) + ": 'solver' must be a mapping");
    reject_unknown(s, {"dt", "atol"}, "solver", source);
    if (s["dt"]) c.dt = scalar<double>(s["dt"], "dt", source);
    if (s["atol"]) c.atol = scalar<double>(s["atol"], "atol", source);
    try {
      c.solver().validate(c.kernel);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where(s, source) + ": " + e.what());
    }
  } else {
    c.dt = std::min(c.dt, SolverConfig::stability_bound(c.kernel));
  }

  if (const YAML::Node f = root["fluctuation"]) {
    if (!f.IsMap()) throw ConfigError(where(f, source) + ": 'fluctuation' must be a mapping");
    reject_unknown(f, {"step", "dual_truncation", "functionals"}, "fluctuation", source);
    if (f["step"]) {
      c.fluctuation_step = scalar<double>(f["step"], "step", source);
      if (!(c.fluctuation_step > 0.0)) throw ConfigError(where(f["step"], source) + ": step must be > 0");
    }
    if (f["dual_truncation"]) {
      const auto lf = scalar<std::int64_t>(f["dual_truncation"], "dual_truncation", source);
      if (lf < 0) throw ConfigError(where(f["dual_truncation"], source) + ": dual_truncation must be >= 0");
      c.dual_truncation = static_cast<std::size_t>(lf);
    }
    if (const YAML::Node fs = f["functionals"]) {
      if (!fs.IsSequence()) throw ConfigError(where(fs, source) + ": 'functionals' must be a list of mass lists");
      c.functionals.clear();
      for (const auto& g : fs) {
        auto support = sequence<mass_t>(g, "functionals", source);
        for (mass_t m : support) {
          if (m < 1 || static_cast<std::size_t>(m) > c.truncation) {
            throw ConfigError(where(g, source) + ": functional support must lie in 1..L");
          }
        }
        c.functionals.push_back(std::move(support));
      }
    }
  }
  if (root["observed"]) {
    c.observed = sequence<mass_t>(root["observed"], "observed", source);
    for (mass_t m : c.observed) {
      if (m < 1 || static_cast<std::size_t>(m) > c.truncation) {
        throw ConfigError(where(root["observed"], source) + ": observed masses must lie in 1..L");
      }
    }
  }
  if (const YAML::Node p = root["covariance_pairs"]) {
    if (!p.IsSequence()) throw ConfigError(where(p, source) + ": 'covariance_pairs' must be a list of pairs");
    for (const auto& item : p) {
      auto pair = parse_pair(item, source);
      if (pair.first < 1 || pair.second < 1 || static_cast<std::size_t>(std::max(pair.first, pair.second)) > c.truncation) {
        throw ConfigError(where(item, source) + ": covariance pair must lie in 1..L");
      }
      c.covariance_pairs.push_back(pair);
    }
  }
  if (root["sizes"]) {
    c.sizes = sequence<mass_t>(root["sizes"], "sizes", source);
    for (mass_t m : c.sizes) {
      if (m < 1) throw ConfigError(where(root["sizes"], source) + ": sizes must be >= 1");
    }
  }

  if (const YAML::Node t = root["tolerances"]) {
    if (!t.IsMap()) throw ConfigError(where(t, source) + ": 'tolerances' must be a mapping");
    reject_unknown(t,
                   {"mean_standard_errors", "variance_relative", "skewness_sigmas", "kurtosis_sigmas",
                    "covariance_relative", "route_relative", "qv_relative", "oracle_standard_errors",
                    "moment_standard_errors", "fluctuation_factor"},
                   "tolerances", source);
    auto read = [&](const char* key, double& into) {
      if (!t[key]) return;
      into = scalar<double>(t[key], key, source);
      if (!(into >= 0.0) || !std::isfinite(into)) throw ConfigError(where(t[key], source) + ": '" + key + "' must be >= 0");
    };
    auto& tol = c.tolerances;
    read("mean_standard_errors", tol.clt.mean_standard_errors);
    read("variance_relative", tol.clt.variance_relative);
    read("skewness_sigmas", tol.clt.skewness_sigmas);
    read("kurtosis_sigmas", tol.clt.kurtosis_sigmas);
    read("covariance_relative", tol.clt.covariance_relative);
    read("route_relative", tol.route_relative);
    read("qv_relative", tol.qv_relative);
    read("oracle_standard_errors", tol.oracle_standard_errors);
    read("moment_standard_errors", tol.moment_standard_errors);
    read("fluctuation_factor", tol.fluctuation_factor);
  }

  if (const YAML::Node v = root["validate"]) {
    if (!v.IsMap()) throw ConfigError(where(v, source) + ": 'validate' must be a mapping");
    reject_unknown(v, {"secondary_kernel", "replica_scale"}, "validate", source);
    if (v["secondary_kernel"]) c.secondary_kernel = parse_kernel(v["secondary_kernel"], "secondary_kernel", source);
    if (v["replica_scale"]) {
      c.replica_scale = scalar<double>(v["replica_scale"], "replica_scale", source);
      if (!(c.replica_scale > 0.0) || c.replica_scale > 1.0) {
        throw ConfigError(where(v["replica_scale"], source) + ": replica_scale must lie in (0, 1]");
      }
    }
  }
  if (root["output"]) c.output = scalar<std::string>(root["output"], "output", source);
  if (root["threads"]) {
    const auto th = scalar<std::int64_t>(root["threads"], "threads", source);
    if (th < 0) throw ConfigError(where(root["threads"], source) + ": threads must be >= 0");
    c.threads = static_cast<unsigned>(th);
  }
  return c;
}

inline YAML::Node load_yaml(const std::string& text, const std::string& source) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
}

/// Reads `path` (empty for defaults only), applies overrides and validates.
inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  YAML::Node root(YAML::NodeType::Map);
  const std::string source = path.empty() ? "<defaults>" : path;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    root = load_yaml(ss.str(), path);
    if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  }
  apply_overrides(root, overrides);
  return parse_config(root, source);
}

/// The configuration as JSON. Execution-only fields (threads, output) are
/// left out, so the JSON identifies the results.
inline nlohmann::json effective_config(const RunConfig& c) {
  nlohmann::json tol = {{"mean_standard_errors", c.tolerances.clt.mean_standard_errors},
                        {"variance_relative", c.tolerances.clt.variance_relative},
                        {"skewness_sigmas", c.tolerances.clt.skewness_sigmas},
                        {"kurtosis_sigmas", c.tolerances.clt.kurtosis_sigmas},
                        {"covariance_relative", c.tolerances.clt.covariance_relative},
                        {"route_relative", c.tolerances.route_relative},
                        {"qv_relative", c.tolerances.qv_relative},
                        {"oracle_standard_errors", c.tolerances.oracle_standard_errors},
                        {"moment_standard_errors", c.tolerances.moment_standard_errors},
                        {"fluctuation_factor", c.tolerances.fluctuation_factor}};
  nlohmann::json pairs = nlohmann::json::array();
  for (auto [a, b] : c.covariance_pairs) pairs.push_back({a, b});
  return {{"kernel", kernel_to_json(c.kernel)},
          {"n", c.n},
          {"T", c.horizon},
          {"grid", c.grid},
          {"L", c.truncation},
          {"replicas", c.replicas},
          {"master_seed", c.master_seed},
          {"sampler", to_string(c.sampler)},
          {"track_martingale", c.track_martingale},
          {"solver", {{"dt", c.dt}, {"atol", c.atol}}},
          {"fluctuation",
           {{"step", c.fluctuation_step}, {"dual_truncation", c.dual_truncation}, {"functionals", c.functionals}}},
          {"observed", c.observed},
          {"covariance_pairs", pairs},
          {"sizes", c.sizes},
          {"tolerances", tol},
          {"validate", {{"secondary_kernel", kernel_to_json(c.secondary_kernel)}, {"replica_scale", c.replica_scale}}}};
}

/// 64-bit FNV-1a, as 16 hex digits.
inline std::string content_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace coag
