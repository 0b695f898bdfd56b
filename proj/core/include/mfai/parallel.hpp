#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mfai {

/// Runs body(begin, end) over [0, n) split into contiguous chunks, one per
/// worker. Chunks never share an index, so any body that writes only to its
/// own indices gives the same bits for every thread count.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n / 256 + 1));
  if (threads == 1) {
    body(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::jthread> workers;
  workers.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    if (begin < end) workers.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(std::size_t{0}, std::min(n, chunk));
}

}  // namespace mfai
