#pragma once

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

// Chunked parallel map over an index range. Results must be written to
// preallocated slots indexed by the loop variable, so the output does not
// depend on the thread count. PUMPLINE_THREADS caps the worker count.

namespace pumpline {

inline int max_threads() {
  int hw = (int)std::thread::hardware_concurrency();
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("PUMPLINE_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) hw = std::min(hw, cap);
    } catch (...) {
      // ignore malformed values, keep hardware default
    }
  }
  return hw;
}

template <typename F>
void parallel_for(int n, F&& body) {
  const int nthreads = std::min(max_threads(), std::max(1, n));
  if (nthreads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve((std::size_t)nthreads);
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&]() {
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
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace pumpline
