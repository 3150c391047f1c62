#pragma once

#include <cstdint>
#include <functional>

namespace grcl {

/// Resolves a worker count: n <= 0 means "use the default", which is the
/// GRCL_THREADS environment variable when set, otherwise the hardware
/// concurrency.
int resolve_threads(int requested);

/// Runs fn(begin, end) over disjoint contiguous chunks of [0, count),
/// possibly on several threads. Chunk boundaries depend only on `count` and
/// the resolved worker count, and each index is processed by exactly one
/// worker, so any per-index output is independent of scheduling.
void parallel_for(std::int64_t count, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace grcl
