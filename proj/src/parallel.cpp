#include "epd/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace epd {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel_enabled(bool enabled) { g_parallel.store(enabled); }

bool parallel_enabled() { return g_parallel.load(); }

int thread_count() {
#ifdef _OPENMP
  int hw = omp_get_max_threads();
#else
  int hw = 1;
#endif
  if (const char* env = std::getenv("EPD_THREADS")) {
    try {
      int requested = std::stoi(env);
      if (requested >= 1) return requested;
    } catch (...) {
      // Malformed value: fall through to the hardware default.
    }
  }
  return std::max(1, hw);
}

}  // namespace epd
