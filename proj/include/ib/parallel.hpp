#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ib {

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Work is handed
/// out through a shared counter; callers write results by index, so the
/// outcome does not depend on the schedule. The first exception (lowest index
/// among those observed) is rethrown after all workers stop.
template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::exception_ptr error;
  std::size_t error_index = count;
  auto worker = [&] {
    for (;;) {
      if (stop.load(std::memory_order_relaxed)) return;
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
        stop.store(true, std::memory_order_relaxed);
      }
    }
  };
  const std::size_t k = std::min(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(k - 1);
  for (std::size_t t = 1; t < k; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Worker count: `requested` if nonzero, else $IB_THREADS, else the hardware
/// concurrency (at least 1).
std::size_t resolve_threads(std::size_t requested);

}  // namespace ib
