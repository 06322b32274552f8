// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace forplane {

// Calls fn(worker, begin, end) on `workers` contiguous chunks of [0, n).
// Worker 0 runs on the calling thread. The first exception (in worker
// order) is rethrown after all workers finish.
template <typename Fn>
void parallel_chunks(std::size_t n, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    fn(0, std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  auto bounds = [&](int w) { return n * static_cast<std::size_t>(w) / workers; };
  auto run = [&](int w) {
    try {
      fn(w, bounds(w), bounds(w + 1));
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  for (int w = 1; w < workers; ++w) threads.emplace_back(run, w);
  run(0);
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace forplane
