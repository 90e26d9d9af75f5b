#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace obsimpact {

/// Worker cap: OBS_IMPACT_THREADS when set, otherwise hardware concurrency.
inline int thread_cap() {
  if (const char* env = std::getenv("OBS_IMPACT_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n). Results must be written to per-index slots;
/// the partition is deterministic.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(thread_cap(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace obsimpact
