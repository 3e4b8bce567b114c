#pragma once

#include <cstddef>
#include <functional>

namespace polreeb {

// Runs fn(0) .. fn(n - 1) on up to `workers` threads. Each index writes only
// its own result slot, so output never depends on scheduling. If any call
// throws, the exception from the lowest failing index is rethrown after all
// workers have stopped.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace polreeb
