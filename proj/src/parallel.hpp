#pragma once

#include <algorithm>
#include <thread>
#include <vector>

#include "cpkl/types.hpp"

namespace cpkl::detail {

/// Runs body(i) for i in [0, n) on `workers` threads with a static contiguous
/// split. Bodies must write disjoint data; results do not depend on `workers`.
template <typename Body>
void parallel_for(Index n, int workers, Body&& body) {
  const Index threads = std::clamp<Index>(workers, 1, std::max<Index>(n, 1));
  if (threads == 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  const Index chunk = (n + threads - 1) / threads;
  for (Index t = 0; t < threads; ++t) {
    const Index lo = t * chunk;
    const Index hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (Index i = lo; i < hi; ++i) body(i);
    });
  }
}

}  // namespace cpkl::detail
