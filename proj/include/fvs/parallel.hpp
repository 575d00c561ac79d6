#pragma once

#include <functional>

namespace fvs {

// FVS_THREADS when set and positive, otherwise the hardware concurrency.
int DefaultThreadCount();

// Splits [begin, end) into at most `threads` contiguous chunks and runs
// fn(chunk_begin, chunk_end) on each. Chunks own disjoint output ranges, so
// results never depend on the thread count.
void ParallelFor(int begin, int end, int threads, const std::function<void(int, int)>& fn);

}  // namespace fvs
