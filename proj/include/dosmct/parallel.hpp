#pragma once

#include <cstddef>
#include <functional>

namespace dosmct {

// Worker count: hardware concurrency, capped by the DOSMCT_THREADS
// environment variable when set.
int worker_count();

// Runs body(i) for i in [0, n). Iterations are split into contiguous static
// blocks; body must only write state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace dosmct
