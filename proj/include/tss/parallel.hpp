#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace tss {

inline int default_threads() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker
/// and must write only to its own outputs, so results do not depend on the
/// worker count. Exceptions are rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = default_threads()) {
  if (n == 0) return;
  if (threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t nworkers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nworkers);
  pool.reserve(nworkers);
  for (std::size_t w = 0; w < nworkers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        // contiguous block per worker
        std::size_t chunk = (n + nworkers - 1) / nworkers;
        std::size_t begin = w * chunk;
        std::size_t end = std::min(n, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace tss
