#ifndef XATTN_PARALLEL_H_
#define XATTN_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace xattn {

// Worker count: $XATTN_THREADS when set to a positive integer, hardware
// concurrency otherwise.
std::size_t thread_count();

// Calls fn(i) for every i in [0, n). Each index must write only to its own
// output slot; results are therefore independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace xattn

#endif  // XATTN_PARALLEL_H_
