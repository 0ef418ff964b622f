#pragma once

#include <cstddef>
#include <functional>

namespace sdeinfer {

/// Worker count: hardware concurrency capped by SDE_INFER_THREADS when that
/// variable holds a positive integer. Always at least 1.
std::size_t worker_count();

/// Calls body(i) for i in [0, n) across worker_count() threads. Each index
/// is visited exactly once; the first exception thrown is rethrown after all
/// workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sdeinfer
