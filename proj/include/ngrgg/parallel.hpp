#pragma once
// Minimal fork-join helper for replica- and row-level parallelism.
// Each index is processed by exactly one worker; results must be written to
// per-index slots so the outcome is independent of scheduling.

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace ngrgg {

inline unsigned worker_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

template <class Body>
void parallel_for(std::size_t count, Body&& body, unsigned threads = 0) {
  if (threads == 0) threads = worker_count();
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  const unsigned spawn = static_cast<unsigned>(
      std::min<std::size_t>(threads, count));
  pool.reserve(spawn - 1);
  for (unsigned k = 1; k < spawn; ++k) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
}

}  // namespace ngrgg
