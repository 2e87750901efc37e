#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace metabbo {

/// Worker cap for fan-out loops: META_BBO_THREADS if set, else hardware
/// concurrency, never more than the number of tasks.
inline int worker_count(int tasks) {
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (const char* env = std::getenv("META_BBO_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end != env && parsed >= 1 && parsed < (1 << 16)) workers = static_cast<int>(parsed);
  }
  return std::max(1, std::min(workers, tasks));
}

/// Runs body(i) for i in [0, n). Bodies must write results only to
/// caller-owned slots indexed by i, so the outcome is independent of worker
/// scheduling. The first exception thrown by any body is rethrown.
inline void parallel_for(int n, const std::function<void(int)>& body) {
  if (n <= 0) return;
  const int workers = worker_count(n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto drain = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(drain);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace metabbo
