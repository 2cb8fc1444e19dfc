#ifndef ODL_PARALLEL_HPP_
#define ODL_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace odl {

/// Worker cap: ODL_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Indices are
/// handed out in contiguous blocks so each result slot has a single writer.
/// If any call throws, the exception from the lowest failing index is
/// rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace odl

#endif  // ODL_PARALLEL_HPP_
