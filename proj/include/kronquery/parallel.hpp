#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace kronquery {

/// Runs `body(lo, hi, block_index)` over fixed 1024-trial blocks, fanned over
/// `threads` workers. Block boundaries do not depend on the thread count, so
/// callers that accumulate per block and combine in block order get results
/// that are bit-identical for any thread count.
template <class Body>
void blocked_parallel_for(long trials, int threads, Body body) {
  constexpr long kBlock = 1024;
  const long blocks = (trials + kBlock - 1) / kBlock;
  if (threads <= 1 || blocks <= 1) {
    for (long b = 0; b < blocks; ++b)
      body(b * kBlock, std::min(trials, (b + 1) * kBlock), b);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const long b = next.fetch_add(1);
        if (b >= blocks) return;
        body(b * kBlock, std::min(trials, (b + 1) * kBlock), b);
      }
    });
  for (auto& th : pool) th.join();
}

inline long blocked_block_count(long trials) {
  constexpr long kBlock = 1024;
  return (trials + kBlock - 1) / kBlock;
}

}  // namespace kronquery
