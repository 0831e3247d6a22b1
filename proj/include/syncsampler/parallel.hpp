#pragma once

#include <cstddef>
#include <functional>

namespace syncsampler {

// Worker cap from SYNCSAMPLER_THREADS, else the hardware concurrency.
std::size_t worker_limit();

// Runs fn(0..n-1) on up to worker_limit() threads. Calls made from inside a
// worker run serially, so nesting never oversubscribes. Results must be
// written to per-index slots; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace syncsampler
