#pragma once

// Exact simulation of the Marcus-Lushnikov chain on mass counts.
//
// Every ordered pair of distinct particles with masses (a, b) merges at rate
// K(a, b) / n. Two exact samplers are provided:
//   direct   - Gillespie over active mass classes, O(#classes) per event;
//   thinning - uniform ordered particle pairs at rate sup K * P(P-1)/n,
//              accepted with probability K(a, b) / sup K; O(1) expected.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coag/kernel.hpp"
#include "coag/rng.hpp"
#include "coag/state.hpp"

namespace coag {

enum class Sampler { direct, thinning };

inline std::string to_string(Sampler s) { return s == Sampler::direct ? "direct" : "thinning"; }

inline Sampler parse_sampler(const std::string& s) {
  if (s == "direct") return Sampler::direct;
  if (s == "thinning") return Sampler::thinning;
  throw std::invalid_argument("unknown sampler '" + s + "' (expected direct or thinning)");
}

/// Total jump rate (1/n) sum_{l,m} K(l,m) (N_l N_m - 1(l=m) N_l).
inline double total_rate(const MassHistogram& h, const Kernel& k) {
  const auto counts = h.dense();
  std::vector<mass_t> active;
  for (mass_t m = 1; m < static_cast<mass_t>(counts.size()); ++m) {
    if (counts[static_cast<std::size_t>(m)] > 0) active.push_back(m);
  }
  double rate = 0.0;
  for (mass_t a : active) {
    const double na = static_cast<double>(counts[static_cast<std::size_t>(a)]);
    for (mass_t b : active) {
      const double nb = static_cast<double>(counts[static_cast<std::size_t>(b)]);
      rate += k(a, b) * na * (a == b ? nb - 1.0 : nb);
    }
  }
  return rate / static_cast<double>(h.n());
}

namespace detail {

// gain(l) = sum_{i<l} K(i,l-i) N_i (N_{l-i} - 1(2i=l))
// loss(l) = sum_i K(l,i) N_l (N_i - 1(i=l))          (without the factor 2)
inline void gain_loss_sums(const MassHistogram& h, const Kernel& k, std::size_t truncation,
                           std::vector<double>& gain, std::vector<double>& loss) {
  const auto counts = h.dense();
  const auto top = static_cast<mass_t>(counts.size()) - 1;
  std::vector<mass_t> active;
  for (mass_t m = 1; m <= top; ++m) {
    if (counts[static_cast<std::size_t>(m)] > 0) active.push_back(m);
  }
  auto N = [&](mass_t m) -> double { return m >= 1 && m <= top ? static_cast<double>(counts[static_cast<std::size_t>(m)]) : 0.0; };
  gain.assign(truncation, 0.0);
  loss.assign(truncation, 0.0);
  for (mass_t l = 1; l <= static_cast<mass_t>(truncation); ++l) {
    double g = 0.0;
    for (mass_t i = 1; i < l; ++i) {
      const double ni = N(i);
      if (ni == 0.0) continue;
      g += k(i, l - i) * ni * (N(l - i) - (2 * i == l ? 1.0 : 0.0));
    }
    double s = 0.0;
    const double nl = N(l);
    if (nl > 0.0) {
      for (mass_t i : active) s += k(l, i) * nl * (N(i) - (i == l ? 1.0 : 0.0));
    }
    gain[static_cast<std::size_t>(l - 1)] = g;
    loss[static_cast<std::size_t>(l - 1)] = s;
  }
}

}  // namespace detail

/// Exact finite-n drift L_n pi(l), l = 1..L, from the count formula:
/// (1/n^2) (gain(l) - 2 loss(l)).
inline std::vector<double> drift_integrand(const MassHistogram& h, const Kernel& k, std::size_t truncation) {
  std::vector<double> gain, loss;
  detail::gain_loss_sums(h, k, truncation, gain, loss);
  const double n2 = static_cast<double>(h.n()) * static_cast<double>(h.n());
  std::vector<double> out(truncation);
  for (std::size_t i = 0; i < truncation; ++i) out[i] = (gain[i] - 2.0 * loss[i]) / n2;
  return out;
}

/// n Gamma_n pi(l), l = 1..L: n times the carre du champ of f = N_l / n.
///
/// A merge of two mass-l particles changes N_l by -2, so that pair type
/// enters with weight 4; every other pair type changes N_l by at most 1.
inline std::vector<double> qv_integrand(const MassHistogram& h, const Kernel& k, std::size_t truncation) {
  std::vector<double> gain, loss;
  detail::gain_loss_sums(h, k, truncation, gain, loss);
  const double n2 = static_cast<double>(h.n()) * static_cast<double>(h.n());
  std::vector<double> out(truncation);
  for (std::size_t i = 0; i < truncation; ++i) {
    const auto l = static_cast<mass_t>(i + 1);
    const double nl = static_cast<double>(h.count(l));
    const double same = k(l, l) * nl * (nl - 1.0);
    out[i] = (gain[i] + 2.0 * loss[i] + 2.0 * same) / n2;
  }
  return out;
}

/// Running integrals of the drift and quadratic-variation integrands.
///
/// Both integrands are constant between jumps, so the integrals are exact
/// piecewise-constant sums. In incremental mode the sums behind the
/// integrands are patched per count change in O(L); otherwise they are
/// recomputed from the histogram after each jump.
class MartingaleAccumulator {
 public:
  MartingaleAccumulator() = default;

  MartingaleAccumulator(const MassHistogram& h, Kernel k, std::size_t truncation, bool incremental = true)
      : kernel_(std::move(k)),
        n_(h.n()),
        incremental_(incremental),
        initial_density_(histogram_to_density(h, truncation)),
        drift_integral_(truncation, 0.0),
        qv_integral_(truncation, 0.0) {
    if (truncation < 1) throw std::invalid_argument("accumulator: truncation must be >= 1");
    if (incremental_) {
      rebuild(h);
    } else {
      refresh(h);
    }
  }

  std::size_t truncation() const noexcept { return drift_integral_.size(); }
  bool incremental() const noexcept { return incremental_; }

  /// Integrates the current integrands over an interval of length dt.
  void advance(double dt) {
    if (dt <= 0.0) return;
    const std::size_t L = truncation();
    if (incremental_) {
      for (std::size_t i = 0; i < L; ++i) {
        drift_integral_[i] += dt * drift_at(i);
        qv_integral_[i] += dt * qv_at(i);
      }
    } else {
      for (std::size_t i = 0; i < L; ++i) {
        drift_integral_[i] += dt * drift_[i];
        qv_integral_[i] += dt * qv_[i];
      }
    }
  }

  /// Updates integrands after the merge (a, b) -> a + b; `after` is the
  /// histogram with the merge applied.
  void on_merge(const MassHistogram& after, mass_t a, mass_t b) {
    if (incremental_) {
      change(a, -1);
      change(b, -1);
      change(a + b, +1);
    } else {
      refresh(after);
    }
  }

  std::vector<double> drift() const {
    if (!incremental_) return drift_;
    std::vector<double> out(truncation());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = drift_at(i);
    return out;
  }

  std::vector<double> qv() const {
    if (!incremental_) return qv_;
    std::vector<double> out(truncation());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = qv_at(i);
    return out;
  }

  const std::vector<double>& drift_integral() const noexcept { return drift_integral_; }
  const std::vector<double>& qv_integral() const noexcept { return qv_integral_; }
  const DensityVector& initial_density() const noexcept { return initial_density_; }

  /// M_t(l) = sqrt(n) (pi_t(l) - pi_0(l) - int_0^t L_n pi_s(l) ds).
  std::vector<double> martingale(const DensityVector& current) const {
    const double scale = std::sqrt(static_cast<double>(n_));
    std::vector<double> out(truncation());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = scale * (current.values[i] - initial_density_.values[i] - drift_integral_[i]);
    }
    return out;
  }

 private:
  double n2() const noexcept { return static_cast<double>(n_) * static_cast<double>(n_); }

  double self_rate(std::size_t i) const noexcept {
    const auto l = static_cast<mass_t>(i + 1);
    return kernel_(l, l);
  }

  double drift_at(std::size_t i) const noexcept {
    const double nl = static_cast<double>(counts_[i + 1]);
    return (gain_[i] - 2.0 * nl * (weighted_[i] - self_rate(i))) / n2();
  }

  double qv_at(std::size_t i) const noexcept {
    const double nl = static_cast<double>(counts_[i + 1]);
    const double kll = self_rate(i);
    return (gain_[i] + 2.0 * nl * (weighted_[i] - kll) + 2.0 * kll * nl * (nl - 1.0)) / n2();
  }

  void rebuild(const MassHistogram& h) {
    const std::size_t L = truncation();
    counts_.assign(L + 1, 0);
    gain_.assign(L, 0.0);
    weighted_.assign(L, 0.0);
    const auto dense = h.dense();
    for (mass_t m = 1; m < static_cast<mass_t>(dense.size()); ++m) {
      const count_t c = dense[static_cast<std::size_t>(m)];
      for (count_t u = 0; u < c; ++u) change(m, +1);
    }
  }

  // One unit change of N_c by d = +-1.
  void change(mass_t c, int d) {
    const auto L = static_cast<mass_t>(truncation());
    for (mass_t l = 1; l <= L; ++l) weighted_[static_cast<std::size_t>(l - 1)] += kernel_(l, c) * d;
    if (c < L) {
      for (mass_t l = c + 1; l <= L; ++l) {
        const mass_t j = l - c;
        double& g = gain_[static_cast<std::size_t>(l - 1)];
        if (j != c) {
          g += 2.0 * kernel_(c, j) * d * static_cast<double>(counts_[static_cast<std::size_t>(j)]);
        } else {
          const double nc = static_cast<double>(counts_[static_cast<std::size_t>(c)]);
          g += kernel_(c, c) * d * (2.0 * nc + d - 1.0);
        }
      }
    }
    if (c <= L) counts_[static_cast<std::size_t>(c)] += d;
  }

  void refresh(const MassHistogram& h) {
    drift_ = drift_integrand(h, kernel_, truncation());
    qv_ = qv_integrand(h, kernel_, truncation());
  }

  Kernel kernel_ = Kernel::constant(0.0, 0);
  mass_t n_ = 1;
  bool incremental_ = true;
  DensityVector initial_density_;
  std::vector<double> drift_integral_;
  std::vector<double> qv_integral_;
  // incremental mode
  std::vector<count_t> counts_;   // N_l for l <= L (index l)
  std::vector<double> gain_;      // gain(l)
  std::vector<double> weighted_;  // sum_i K(l, i) N_i over all masses i
  // recompute mode
  std::vector<double> drift_;
  std::vector<double> qv_;
};

/// A realized merge of masses a and b at `time`.
struct Event {
  double time = 0.0;
  mass_t a = 0;
  mass_t b = 0;
};

/// One replica of the chain. Strictly sequential.
class Simulator {
 public:
  Simulator(MassHistogram initial, Kernel kernel, Sampler sampler, RandomStream rng)
      : histogram_(std::move(initial)), kernel_(std::move(kernel)), sampler_(sampler), rng_(std::move(rng)) {
    if (sampler_ == Sampler::direct) {
      init_direct();
    } else {
      init_thinning();
    }
  }

  double time() const noexcept { return time_; }
  std::uint64_t event_count() const noexcept { return events_; }
  const MassHistogram& histogram() const noexcept { return histogram_; }
  const Kernel& kernel() const noexcept { return kernel_; }
  Sampler sampler() const noexcept { return sampler_; }

  /// Total jump rate of the current state.
  double rate() const { return total_rate(histogram_, kernel_); }

  /// Advances to the next jump if it happens at or before `horizon` and
  /// returns it; otherwise moves the clock to `horizon` and returns nullopt.
  /// A state with zero jump rate is absorbing and always returns nullopt.
  std::optional<Event> step(double horizon, MartingaleAccumulator* acc = nullptr) {
    if (horizon < time_) throw std::invalid_argument("simulator: horizon before current time");
    std::optional<Event> event =
        sampler_ == Sampler::direct ? step_direct(horizon) : step_thinning(horizon);
    if (acc != nullptr) {
      acc->advance((event ? event->time : horizon) - last_jump_time_);
      if (event) acc->on_merge(histogram_, event->a, event->b);
    }
    time_ = event ? event->time : horizon;
    last_jump_time_ = time_;
    if (event) ++events_;
    return event;
  }

 private:
  // Integration of the accumulator runs from the last jump (or the last
  // horizon stop) to the next one.
  double last_jump_time_ = 0.0;

  void init_thinning() {
    particles_.clear();
    particles_.reserve(static_cast<std::size_t>(histogram_.particle_count()));
    const auto counts = histogram_.dense();
    for (mass_t m = 1; m < static_cast<mass_t>(counts.size()); ++m) {
      for (count_t c = 0; c < counts[static_cast<std::size_t>(m)]; ++c) particles_.push_back(m);
    }
  }

  std::optional<Event> step_thinning(double horizon) {
    const double sup = kernel_.sup_norm();
    const auto p = static_cast<std::uint64_t>(particles_.size());
    if (sup <= 0.0 || p < 2) return std::nullopt;
    const double proposal_rate = sup * static_cast<double>(p) * static_cast<double>(p - 1) /
                                 static_cast<double>(histogram_.n());
    double t = time_;
    for (;;) {
      t += rng_.exponential(proposal_rate);
      if (t > horizon) return std::nullopt;
      const std::uint64_t i = rng_.below(p);
      std::uint64_t j = rng_.below(p - 1);
      if (j >= i) ++j;
      const mass_t a = particles_[i];
      const mass_t b = particles_[j];
      if (rng_.uniform() * sup >= kernel_(a, b)) continue;
      particles_[i] = a + b;
      particles_[j] = particles_.back();
      particles_.pop_back();
      histogram_.merge(a, b);
      return Event{t, a, b};
    }
  }

  void init_direct() {
    const auto n = histogram_.n();
    position_.assign(static_cast<std::size_t>(n + 1), -1);
    weight_.assign(static_cast<std::size_t>(n + 1), 0.0);
    active_.clear();
    const auto counts = histogram_.dense();
    for (mass_t m = 1; m <= n; ++m) {
      if (counts[static_cast<std::size_t>(m)] > 0) activate(m);
    }
    refresh_weights();
  }

  void activate(mass_t m) {
    position_[static_cast<std::size_t>(m)] = static_cast<std::int64_t>(active_.size());
    active_.push_back(m);
  }

  void deactivate(mass_t m) {
    const auto pos = static_cast<std::size_t>(position_[static_cast<std::size_t>(m)]);
    const mass_t last = active_.back();
    active_[pos] = last;
    position_[static_cast<std::size_t>(last)] = static_cast<std::int64_t>(pos);
    active_.pop_back();
    position_[static_cast<std::size_t>(m)] = -1;
  }

  double fresh_weight(mass_t l) const {
    double w = 0.0;
    for (mass_t m : active_) w += kernel_(l, m) * static_cast<double>(histogram_.count(m));
    return w;
  }

  void refresh_weights() {
    for (mass_t l : active_) weight_[static_cast<std::size_t>(l)] = fresh_weight(l);
  }

  // r_l = N_l (W_l - K(l,l)) with W_l = sum_m K(l,m) N_m: the total rate of
  // ordered pairs whose first particle has mass l, times n.
  double class_rate(mass_t l) const {
    const double nl = static_cast<double>(histogram_.count(l));
    const double r = nl * (weight_[static_cast<std::size_t>(l)] - kernel_(l, l));
    return r > 0.0 ? r : 0.0;
  }

  std::optional<Event> step_direct(double horizon) {
    if (histogram_.particle_count() < 2) return std::nullopt;
    double total = 0.0;
    for (mass_t l : active_) total += class_rate(l);
    if (!(total > 0.0)) return std::nullopt;
    const double t = time_ + rng_.exponential(total / static_cast<double>(histogram_.n()));
    if (t > horizon) return std::nullopt;

    // First particle's class, then the partner's class.
    double target = rng_.uniform() * total;
    mass_t a = 0;
    for (mass_t l : active_) {
      const double r = class_rate(l);
      if (r <= 0.0) continue;
      a = l;
      if (target < r) break;
      target -= r;
    }
    double partner_total = 0.0;
    for (mass_t m : active_) partner_total += partner_weight(a, m);
    target = rng_.uniform() * partner_total;
    mass_t b = 0;
    for (mass_t m : active_) {
      const double w = partner_weight(a, m);
      if (w <= 0.0) continue;
      b = m;
      if (target < w) break;
      target -= w;
    }
    apply_direct(a, b);
    return Event{t, a, b};
  }

  double partner_weight(mass_t a, mass_t m) const {
    const auto nm = histogram_.count(m);
    return kernel_(a, m) * static_cast<double>(a == m ? nm - 1 : nm);
  }

  void apply_direct(mass_t a, mass_t b) {
    const mass_t c = a + b;
    const bool was_active = histogram_.count(c) > 0;
    histogram_.merge(a, b);
    if (histogram_.count(a) == 0) deactivate(a);
    if (b != a && histogram_.count(b) == 0) deactivate(b);
    for (mass_t l : active_) {
      weight_[static_cast<std::size_t>(l)] += kernel_(l, c) - kernel_(l, a) - kernel_(l, b);
    }
    if (!was_active) {
      activate(c);
      weight_[static_cast<std::size_t>(c)] = fresh_weight(c);
    }
    // Bound round-off drift in the incremental weights.
    if (++since_refresh_ >= 1024) {
      refresh_weights();
      since_refresh_ = 0;
    }
  }

  MassHistogram histogram_;
  Kernel kernel_;
  Sampler sampler_;
  RandomStream rng_;
  double time_ = 0.0;
  std::uint64_t events_ = 0;

  // thinning
  std::vector<mass_t> particles_;
  // direct
  std::vector<mass_t> active_;
  std::vector<std::int64_t> position_;
  std::vector<double> weight_;
  int since_refresh_ = 0;
};

/// Snapshot of one replica at a grid time.
struct Snapshot {
  double time = 0.0;
  DensityVector density;
  count_t particles = 0;
  mass_t total_mass = 0;               // sum l N_l over the full histogram
  std::array<double, 5> moments{};     // moments[p] = sum l^p N_l / n
  std::vector<double> drift_integral;  // empty unless the martingale is tracked
  std::vector<double> qv_integral;
  std::vector<double> martingale;
};

struct Trajectory {
  std::uint64_t master_seed = 0;
  std::uint64_t replica = 0;
  std::vector<Snapshot> snapshots;
  MassHistogram final_state;
  std::uint64_t events = 0;
};

struct SimulationConfig {
  mass_t n = 1;
  Kernel kernel = Kernel::constant(1.0);
  double horizon = 0.0;
  std::vector<double> grid{0.0};
  std::size_t truncation = 1;
  std::uint64_t master_seed = 0;
  Sampler sampler = Sampler::thinning;
  bool track_martingale = true;
  bool incremental = true;

  void validate() const {
    if (n < 1) throw std::invalid_argument("simulation: n must be >= 1");
    if (truncation < 1) throw std::invalid_argument("simulation: truncation L must be >= 1");
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("simulation: horizon must be >= 0");
    if (grid.empty()) throw std::invalid_argument("simulation: grid must not be empty");
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (!(grid[j] >= 0.0) || grid[j] > horizon) {
        throw std::invalid_argument("simulation: grid time " + std::to_string(grid[j]) + " outside [0, T]");
      }
      if (j > 0 && grid[j] <= grid[j - 1]) throw std::invalid_argument("simulation: grid must be strictly increasing");
    }
  }
};

/// Called after every jump with the updated histogram.
using EventObserver = std::function<void(const Event&, const MassHistogram&)>;

/// Runs replica `replica` from the monodisperse state. The state recorded at
/// grid time t is the state after the last jump at time <= t.
inline Trajectory run(const SimulationConfig& cfg, std::uint64_t replica = 0,
                      const EventObserver& observer = {}) {
  cfg.validate();
  auto initial = MassHistogram::monodisperse(cfg.n);
  std::optional<MartingaleAccumulator> acc;
  if (cfg.track_martingale) acc.emplace(initial, cfg.kernel, cfg.truncation, cfg.incremental);
  Simulator sim(std::move(initial), cfg.kernel, cfg.sampler, RandomStream(cfg.master_seed, replica));

  Trajectory traj;
  traj.master_seed = cfg.master_seed;
  traj.replica = replica;
  traj.snapshots.reserve(cfg.grid.size());
  for (double t : cfg.grid) {
    while (auto event = sim.step(t, acc ? &*acc : nullptr)) {
      if (observer) observer(*event, sim.histogram());
    }
    Snapshot snap;
    snap.time = t;
    const auto& h = sim.histogram();
    snap.density = histogram_to_density(h, cfg.truncation);
    snap.particles = h.particle_count();
    snap.total_mass = h.total_mass();
    for (int p = 0; p <= 4; ++p) snap.moments[static_cast<std::size_t>(p)] = h.moment(p);
    if (acc) {
      snap.drift_integral = acc->drift_integral();
      snap.qv_integral = acc->qv_integral();
      snap.martingale = acc->martingale(snap.density);
    }
    traj.snapshots.push_back(std::move(snap));
  }
  traj.final_state = sim.histogram();
  traj.events = sim.event_count();
  return traj;
}

}  // namespace coag
