#pragma once

#include <cstddef>
#include <functional>

namespace rtb {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items must be independent;
// results are expected to be written to per-index slots so the merge is deterministic.
// The first exception thrown by any item is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

unsigned default_jobs();

}  // namespace rtb
