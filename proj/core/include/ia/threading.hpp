#pragma once

#include <cstdint>
#include <functional>

namespace ia {

// Number of worker threads for internal parallelism. Resolved once from the
// IA_THREADS environment variable (0 or unset = hardware concurrency).
int thread_count();

// Runs fn(begin, end) over disjoint chunks of [0, n). Each index is processed
// by exactly one worker and every per-index computation keeps its own fixed
// summation order, so results are bit-identical for any thread count.
// Falls back to a single inline call when n or grain is small.
void parallel_for(int64_t n, int64_t grain, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace ia
