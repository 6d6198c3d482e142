#pragma once

// Replica-parallel execution with an order-preserving consumer.
//
// Replicas are produced in batches by a pool of threads; each batch is then
// handed to the consumer in replica-index order, so anything the consumer
// reduces is independent of the thread count and scheduling.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "coag/simulator.hpp"

namespace coag {

inline unsigned default_thread_count(std::uint64_t replicas) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::max<std::uint64_t>(1, std::min<std::uint64_t>(hw, replicas)));
}

/// Calls produce(r) for r in [0, replicas) on `threads` workers and
/// consume(r, result) sequentially in increasing r.
template <class Result>
void run_replicas(std::uint64_t replicas, unsigned threads, const std::function<Result(std::uint64_t)>& produce,
                  const std::function<void(std::uint64_t, Result&&)>& consume, std::uint64_t batch = 0) {
  if (threads == 0) threads = default_thread_count(replicas);
  threads = static_cast<unsigned>(std::max<std::uint64_t>(1, std::min<std::uint64_t>(threads, std::max<std::uint64_t>(replicas, 1))));
  if (batch == 0) batch = std::max<std::uint64_t>(64, 16ull * threads);
  std::vector<Result> slots;
  for (std::uint64_t start = 0; start < replicas; start += batch) {
    const std::uint64_t count = std::min(batch, replicas - start);
    slots.clear();
    slots.resize(count);
    if (threads == 1) {
      for (std::uint64_t i = 0; i < count; ++i) slots[i] = produce(start + i);
    } else {
      std::atomic<std::uint64_t> next{0};
      std::exception_ptr error;
      std::mutex error_mutex;
      std::vector<std::jthread> pool;
      pool.reserve(threads);
      for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
          for (;;) {
            const std::uint64_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
              slots[i] = produce(start + i);
            } catch (...) {
              std::lock_guard lock(error_mutex);
              if (!error) error = std::current_exception();
              next.store(count);
              return;
            }
          }
        });
      }
      pool.clear();  // joins
      if (error) std::rethrow_exception(error);
    }
    for (std::uint64_t i = 0; i < count; ++i) consume(start + i, std::move(slots[i]));
  }
}

/// Runs `replicas` trajectories of `cfg` and feeds them to `consume` in order.
inline void run_ensemble(const SimulationConfig& cfg, std::uint64_t replicas, unsigned threads,
                         const std::function<void(std::uint64_t, Trajectory&&)>& consume) {
  cfg.validate();
  run_replicas<Trajectory>(
      replicas, threads, [&](std::uint64_t r) { return run(cfg, r); }, consume);
}

}  // namespace coag
