#pragma once

#include <cstddef>
#include <functional>

namespace keyrate {

/// Worker count: KEYRATE_THREADS if set and positive, else the hardware
/// concurrency (at least 1). A positive `requested` wins over both.
int resolve_thread_count(int requested = 0);

/// Runs body(i) for i in [0, n) on up to `threads` workers using a static
/// contiguous partition. Each index is processed exactly once and results
/// are expected to be written to per-index slots, so output does not depend
/// on the thread count. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace keyrate
