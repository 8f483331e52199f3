#pragma once

#include <cstddef>
#include <functional>

namespace iqscore {

// Process-wide worker cap. 0 means hardware concurrency. Results of every
// parallel routine in this library are independent of this value.
void set_worker_count(std::size_t workers) noexcept;
std::size_t worker_count() noexcept;

// Runs body(i) for i in [0, count). Work items are claimed dynamically; each
// item must write only to its own output slot.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace iqscore
