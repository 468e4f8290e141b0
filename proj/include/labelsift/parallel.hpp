#pragma once

#include <cstddef>
#include <functional>

namespace labelsift {

/// Worker cap: LABELSIFT_THREADS if set to a positive integer, else the
/// hardware concurrency (at least 1).
std::size_t max_threads();

/// Run task(i) for i in [0, count) on up to max_threads() threads.
/// Tasks must write to disjoint outputs; the first exception (lowest index)
/// is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task);

}  // namespace labelsift
