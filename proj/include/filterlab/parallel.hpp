#pragma once

#include <cstddef>
#include <functional>

namespace filterlab {

// Worker count from FILTERLAB_WORKERS, defaulting to the hardware
// concurrency. Never affects results: work is partitioned statically and
// every reduction runs in index order afterwards.
std::size_t worker_count();

// Calls body(i) for i in [0, n) over contiguous chunks, one per worker.
// Exceptions from workers are rethrown (the lowest chunk's first).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace filterlab
