#pragma once

#include <cstddef>
#include <functional>

namespace mrpath {

/// Worker cap: MRPATH_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Overrides worker_count() for the calling process (0 restores the default).
void set_worker_count(std::size_t n);

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index must write
/// only its own output slot; callers reduce afterwards in index order, which
/// keeps results independent of the worker count. The first exception thrown
/// by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mrpath
