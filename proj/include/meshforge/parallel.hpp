#pragma once

#include <cstddef>
#include <functional>

namespace meshforge {

/// Number of worker threads used by parallel_for. Defaults to the
/// MESHFORGE_THREADS environment variable, else the hardware count.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks never
/// overlap, so bodies writing to disjoint per-index outputs need no locking.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace meshforge
