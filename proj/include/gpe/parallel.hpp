#pragma once

#include <cstddef>
#include <functional>

namespace gpe {

/// Number of worker threads used by parallel_for. Defaults to 1.
void set_thread_cap(unsigned threads);
unsigned thread_cap();

/// Runs body(i) for i in [0, count). Each index is executed exactly once; callers
/// write results into per-index slots and reduce them afterwards in index order,
/// so results do not depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace gpe
