#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace coordfree {

struct ExecutionOptions {
  unsigned jobs = 1;
};

/// Runs fn(begin, end) over [0, n) split into contiguous chunks. Chunk
/// boundaries are multiples of `align` so that workers writing into bit-packed
/// sets never share a word. The first exception thrown by a worker is
/// rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn, std::size_t align = 64) {
  if (n == 0) return;
  jobs = std::max(1u, jobs);
  std::size_t chunk = (n + jobs - 1) / jobs;
  chunk = ((chunk + align - 1) / align) * align;
  if (jobs == 1 || chunk >= n) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors((n + chunk - 1) / chunk);
  for (std::size_t c = 0, begin = 0; begin < n; ++c, begin += chunk) {
    std::size_t end = std::min(n, begin + chunk);
    workers.emplace_back([&, c, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace coordfree
