#pragma once

#include <cstddef>
#include <functional>

namespace phonoscope {

// Worker count: PHONOSCOPE_THREADS when set to a positive integer, else all cores.
std::size_t thread_count();

// Runs body(i) for i in [0, n). Each index must write only its own output slot.
// The first exception thrown by any body is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace phonoscope
