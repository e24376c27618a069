#pragma once

#include <cstddef>
#include <functional>

namespace mest {

/// Worker cap: MEST_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Calls fn(i) for i in [0, n), possibly from several threads. Results must
/// be written to per-index slots; the caller reduces them in index order.
/// The exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mest
