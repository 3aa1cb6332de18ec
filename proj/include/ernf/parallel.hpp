#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include <omp.h>

namespace ernf {

// 0 means "OpenMP default".
inline int resolve_threads(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

// Runs f(i) for i in [0, n) on an OpenMP team. The first exception thrown by
// any iteration is rethrown on the calling thread once the loop has drained.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_threads(threads))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

// Fixed chunking used by every reduction in the library: the chunk layout
// depends only on the problem size, never on the thread count, so partial
// sums are combined in the same order whatever the team size.
inline constexpr std::size_t kReductionChunk = 64;

inline std::size_t chunk_count(std::size_t n, std::size_t chunk = kReductionChunk) {
  return (n + chunk - 1) / chunk;
}

}  // namespace ernf
