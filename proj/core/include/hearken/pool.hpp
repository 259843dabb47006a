#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace hearken {

// Worker count for embarrassingly parallel grids; ITH_THREADS caps it.
inline int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("ITH_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1 && cap < n) n = cap;
  }
  return n;
}

// Runs job(0..n_jobs-1) on a fixed pool. Each job must be self-contained;
// callers assemble results from index-addressed slots, so the outcome does
// not depend on scheduling order.
inline void parallel_jobs(int n_jobs, const std::function<void(int)>& job) {
  const int workers = std::min(worker_count(), n_jobs);
  if (workers <= 1) {
    for (int i = 0; i < n_jobs; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n_jobs; i = next.fetch_add(1)) job(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace hearken
