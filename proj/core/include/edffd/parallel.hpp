#pragma once

#include <cstddef>
#include <functional>

namespace edffd {

/// Number of worker threads used by data-parallel kernels. Reads EDFFD_THREADS
/// once (0 or unset = hardware concurrency).
std::size_t worker_count();

/// Overrides the worker count for the current process; 0 restores the default.
void set_worker_count(std::size_t n);

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries do
/// not affect results as long as body only writes indices in its range.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace edffd
