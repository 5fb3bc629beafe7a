// Minimal fixed-size worker pool. Work is partitioned by output index, so
// results are bitwise identical for any worker count; GAMLAB_THREADS pins
// the count (default 1).
#pragma once

#include <cstdint>
#include <functional>

namespace gamlab {

// Number of workers in use (>= 1). Resolved once from GAMLAB_THREADS.
int thread_count();

// Override the worker count (tests / CLI flags). Must be >= 1.
void set_thread_count(int n);

// Runs fn(begin, end) over a partition of [0, n). Serial when n is small or
// one worker is configured. fn must not throw.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

} // namespace gamlab
