#pragma once

#include <cstddef>
#include <functional>

namespace lightcone {

// Number of worker threads used by parallel_for. 0 selects
// std::thread::hardware_concurrency().
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs body(i) for i in [0, n) split into contiguous static chunks. Each index
// is visited exactly once; callers write into per-index slots so results do
// not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lightcone
