#pragma once

#include <cstddef>
#include <functional>

namespace cmtssl {

// Number of worker threads: CMTSSL_THREADS env var if set, otherwise the
// hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n). Work is partitioned by index, so results that
// are written to per-index slots are identical regardless of thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cmtssl
