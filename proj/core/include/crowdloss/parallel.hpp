#pragma once

#include <cstddef>
#include <functional>

namespace crowdloss {

/// Worker count: CROWDLOSS_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t thread_budget();

/// Runs fn(0..n-1) on up to `threads` workers. Each index runs exactly once;
/// callers write results into per-index slots so aggregation stays ordered.
/// If any call throws, the exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t threads = thread_budget());

}  // namespace crowdloss
