#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

#include "helixsim/types.hpp"

namespace helixsim {

// Worker cap: HELIXSIM_THREADS if set (>= 1), else hardware concurrency.
inline i64 thread_cap() {
  if (const char* env = std::getenv("HELIXSIM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<i64>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<i64>(hc);
}

// Run fn(i) for i in [0, n). Each index is handled exactly once and results
// must be index-addressed by the caller, so output is identical for any
// worker count.
inline void parallel_for(i64 n, const std::function<void(i64)>& fn) {
  const i64 workers = std::min<i64>(thread_cap(), std::max<i64>(n, 1));
  if (workers <= 1 || n <= 1) {
    for (i64 i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const i64 block = ceil_div(n, workers);
  for (i64 w = 0; w < workers; ++w) {
    const i64 lo = w * block;
    const i64 hi = std::min(n, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] {
      for (i64 i = lo; i < hi; ++i) fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace helixsim
