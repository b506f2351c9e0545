#pragma once

#include <cstddef>
#include <functional>

namespace ulab {

void set_threads(unsigned n);  // 0 = hardware concurrency
unsigned threads();

// Runs fn(i) for i in [0, n).  Each index is processed exactly once; callers
// write results into per-index slots so the output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ulab
