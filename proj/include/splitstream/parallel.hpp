#pragma once

#include <cstddef>
#include <functional>

namespace splitstream {

/// Worker count used when a call does not specify one. Initialized from
/// SPLITSTREAM_THREADS, falling back to the hardware concurrency.
unsigned default_threads();
void set_default_threads(unsigned n);

/// Runs body(i) for i in [0, n). Work is split by index, so results written to
/// per-index slots do not depend on the thread count. The exception thrown by
/// the lowest failing index is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, unsigned threads = 0);

}  // namespace splitstream
