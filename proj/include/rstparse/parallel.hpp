#ifndef RSTPARSE_PARALLEL_HPP
#define RSTPARSE_PARALLEL_HPP

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rstparse
{
  // Runs fn(i) for i in [0, n) on up to `workers` threads. The first
  // exception thrown by any call is rethrown after all threads join.
  template <class Fn>
  void parallel_for(std::size_t n, int workers, Fn&& fn)
  {
    if (workers <= 1 || n <= 1) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    };
    std::vector<std::jthread> pool;
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(run);
    pool.clear();
    if (error) std::rethrow_exception(error);
  }
}

#endif
