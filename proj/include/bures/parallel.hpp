#pragma once

#include <cstddef>
#include <functional>

namespace bures {

/// Worker count: hardware concurrency, capped by BURES_FLOW_THREADS when set.
unsigned default_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; callers write results into per-index slots so the
/// outcome does not depend on scheduling. The first exception thrown by any
/// worker is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace bures
