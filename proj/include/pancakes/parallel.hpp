#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace pancakes {

/// Worker budget: PANCAKE_THREADS if set (clamped to >= 1), else hardware
/// concurrency. The budget never affects results, only wall time: work items
/// are keyed by index, and reductions happen in index order on the caller.
inline int thread_budget() {
  if (const char* env = std::getenv("PANCAKE_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
    return 1;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace detail {
inline bool& inside_parallel_region() {
  thread_local bool inside = false;
  return inside;
}
}  // namespace detail

/// Runs fn(i) for i in [0, n). Each item must be self-contained (own rng
/// substream, own output slot); items are claimed from a shared counter, so
/// the schedule varies but the per-index results do not. Nested calls run
/// serially on the calling worker.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  if (n == 0) return;
  int workers = thread_budget();
  if (workers <= 1 || n == 1 || detail::inside_parallel_region()) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (static_cast<std::size_t>(workers) > n)
    workers = static_cast<int>(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    detail::inside_parallel_region() = true;
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) {
        detail::inside_parallel_region() = false;
        return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        detail::inside_parallel_region() = false;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace pancakes
