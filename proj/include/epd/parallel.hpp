#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace epd {

// Global execution mode. The parallel build is the default; the serial path is
// kept as a reference implementation and every parallel site is written so the
// two produce bit-identical results (independent per-item RNG streams, ordered
// reductions).
void set_parallel_enabled(bool enabled);
bool parallel_enabled();

// Effective worker count: min(EPD_THREADS, hardware) when the env var is set.
int thread_count();

template <typename F>
void parallel_for(std::ptrdiff_t n, F&& body) {
  if (n <= 0) return;
#ifdef _OPENMP
  if (parallel_enabled() && n > 1) {
    std::exception_ptr err;
    std::mutex err_mutex;
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    return;
  }
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
}

}  // namespace epd
