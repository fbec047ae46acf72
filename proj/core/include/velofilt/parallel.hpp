#pragma once

#include <cstddef>
#include <functional>

namespace velofilt {

// Worker count: explicit setting, else VELOFILT_THREADS, else 1.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [0, n) on up to thread_count() threads. Each index is
// processed exactly once and writes must go to disjoint outputs, so results
// never depend on the thread count. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace velofilt
