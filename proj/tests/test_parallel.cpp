#include "epd/parallel.hpp"

#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"

using namespace epd;

TEST_CASE("parallel_for visits every index exactly once") {
  for (const bool enabled : {true, false}) {
    set_parallel_enabled(enabled);
    CHECK(parallel_enabled() == enabled);
    std::vector<int> visits(257, 0);
    parallel_for(257, [&](std::ptrdiff_t i) { visits[i] += 1; });
    CHECK(std::accumulate(visits.begin(), visits.end(), 0) == 257);
    for (int v : visits) CHECK(v == 1);
  }
  set_parallel_enabled(true);
}

TEST_CASE("parallel_for with an empty range never invokes the body") {
  int calls = 0;
  parallel_for(0, [&](std::ptrdiff_t) { ++calls; });
  parallel_for(-5, [&](std::ptrdiff_t) { ++calls; });
  CHECK(calls == 0);
}

TEST_CASE("exceptions thrown by the body propagate to the caller") {
  for (const bool enabled : {true, false}) {
    set_parallel_enabled(enabled);
    auto boom = [&] {
      parallel_for(64, [](std::ptrdiff_t i) {
        if (i == 37) throw std::runtime_error("item 37 failed");
      });
    };
    CHECK_THROWS_AS(boom(), std::runtime_error);
  }
  set_parallel_enabled(true);
}

TEST_CASE("EPD_THREADS caps the worker count") {
  const char* saved = std::getenv("EPD_THREADS");
  const std::string old = saved != nullptr ? saved : "";

  setenv("EPD_THREADS", "1", 1);
  CHECK(thread_count() == 1);
  setenv("EPD_THREADS", "3", 1);
  CHECK(thread_count() == 3);
  setenv("EPD_THREADS", "not-a-number", 1);
  CHECK(thread_count() >= 1);
  setenv("EPD_THREADS", "0", 1);
  CHECK(thread_count() >= 1);

  if (saved != nullptr) setenv("EPD_THREADS", old.c_str(), 1);
  else unsetenv("EPD_THREADS");
}

TEST_CASE("a capped run still covers the whole range") {
  setenv("EPD_THREADS", "2", 1);
  std::vector<int> visits(64, 0);
  parallel_for(64, [&](std::ptrdiff_t i) { visits[i] += 1; });
  for (int v : visits) CHECK(v == 1);
  unsetenv("EPD_THREADS");
}
