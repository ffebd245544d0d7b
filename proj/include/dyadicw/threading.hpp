#pragma once

// Minimal fork-join parallel loop. Thread count defaults to the hardware
// concurrency and can be capped with the DYADICW_THREADS environment
// variable; results must not depend on scheduling (callers write to
// disjoint slots and combine in fixed order).

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "linalg.hpp"

namespace dyadicw {

inline int thread_budget() {
  static const int cached = [] {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("DYADICW_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end == env || v < 1) fail("DYADICW_THREADS must be a positive integer");
      n = static_cast<int>(std::min<long>(v, 256));
    }
    return n;
  }();
  return cached;
}

// Runs fn(i) for i in [0, count) across the thread budget. Exceptions from
// workers are rethrown on the calling thread (first one wins).
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const int threads = std::min<std::size_t>(thread_budget(), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err = nullptr;
  std::mutex err_mu;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace dyadicw
