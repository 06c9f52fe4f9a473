#ifndef OULAB_PARALLEL_HPP
#define OULAB_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace oulab {

/// Worker cap for Monte Carlo loops. Defaults to OULAB_THREADS, else 1.
int threadCount();
void setThreadCount(int threads);

/// Calls body(i) for i in [0, count), split into contiguous blocks over
/// threadCount() workers. Results must not depend on the split.
void parallelFor(std::size_t count, const std::function<void(std::size_t)> &body);

} // namespace oulab

#endif // OULAB_PARALLEL_HPP
