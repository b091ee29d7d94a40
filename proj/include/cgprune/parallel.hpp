#pragma once

#include <cstddef>
#include <functional>

namespace cgprune {

// Worker cap from CGPRUNE_THREADS; defaults to hardware concurrency (at least 1).
std::size_t worker_count();

// Runs body(i) for i in [0, n). Each index is visited exactly once; callers write
// results to pre-assigned slots so output order never depends on scheduling.
// The first exception thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cgprune
