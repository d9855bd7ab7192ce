#pragma once

#include <cstddef>
#include <functional>

namespace rh {

// Worker count: RH_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
unsigned worker_count();

// Calls body(i) for i in [0, n) on up to worker_count() threads. Indices are
// handed out in contiguous blocks; the first exception thrown is rethrown
// after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace rh
