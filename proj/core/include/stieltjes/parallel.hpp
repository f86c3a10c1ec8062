#pragma once

#include <cstddef>
#include <functional>

namespace stieltjes {

/// Worker count for fan-out work: STIELTJES_THREADS if set to a positive
/// integer, otherwise the hardware concurrency (at least 1).
std::size_t parallelWidth();

/// Runs body(i) for i in [0, n) on up to parallelWidth() threads. Each index
/// runs exactly once; if any call throws, the exception of the lowest failing
/// index is rethrown after all workers finish.
void parallelFor(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace stieltjes
