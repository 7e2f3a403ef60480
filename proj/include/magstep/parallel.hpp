#pragma once

#include <algorithm>
#include <cstddef>
#include <future>
#include <vector>

namespace magstep {

// fn(i) for i < n, at most jobs concurrently; jobs <= 1 runs inline.
template <class F>
void parallel_for(std::size_t n, int jobs, F fn) {
  const std::size_t width = std::size_t(std::max(1, jobs));
  for (std::size_t start = 0; start < n; start += width) {
    std::vector<std::future<void>> fs;
    for (std::size_t i = start; i < std::min(n, start + width); ++i)
      fs.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred, fn, i));
    for (auto& f : fs) f.get();
  }
}

}  // namespace magstep
