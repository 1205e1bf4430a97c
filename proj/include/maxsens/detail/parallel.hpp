// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#ifndef MAXSENS_DETAIL_PARALLEL_HPP
#define MAXSENS_DETAIL_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace maxsens {
namespace detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run body(i) for i in [0, n) on `threads` workers.  Indices are handed out
/// by an atomic-free block partition, so which worker runs which index is
/// irrelevant to the result: every index writes only to its own slot.  The
/// first exception thrown by any worker is rethrown on the caller.
template <typename Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  const int t = resolve_threads(threads);
  if (t <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  const std::size_t workers = std::min<std::size_t>(t, n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        // Strided assignment: worker w handles indices w, w+workers, ...
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail
}  // namespace maxsens

#endif  // MAXSENS_DETAIL_PARALLEL_HPP
