#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace lfb {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for i in [0, n). Work items must write only to their own
// output slots; the schedule is then irrelevant to the result, so output
// is identical for any thread count. If items throw, the lowest-index
// exception is rethrown after all workers stop, again independent of
// scheduling.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = resolve_threads(threads);
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<bool> failed{false};
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n || failed.load(std::memory_order_relaxed)) break;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };
  std::vector<std::thread> pool;
  int spawn = std::min(threads, n);
  pool.reserve(spawn);
  for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed.load())
    for (int i = 0; i < n; ++i)
      if (errors[i]) std::rethrow_exception(errors[i]);
}

}  // namespace lfb
