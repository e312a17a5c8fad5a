#pragma once

#include <cstddef>
#include <functional>

namespace freeflow {

// Number of worker threads used by parallel_for. Honors FREEFLOW_THREADS
// (a positive integer) and otherwise uses the hardware concurrency.
std::size_t worker_count();

// Runs body(i) for i in [0, n). Work is split into contiguous chunks, one per
// worker; each index is processed exactly once, so results written to
// per-index slots are deterministic regardless of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace freeflow
