#pragma once

// Deterministic work distribution: paths are split into fixed blocks, blocks
// are claimed by threads from an atomic counter, per-block results land in
// per-block slots, and the caller reduces the slots in block order. Output
// is therefore identical for 1 worker and N workers.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace pathcurv {

inline constexpr std::uint64_t kPathBlock = 8192;

inline int worker_count() {
  if (const char* env = std::getenv("PATHCURV_WORKERS")) {
    const long w = std::strtol(env, nullptr, 10);
    if (w >= 1 && w <= 512) return static_cast<int>(w);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

// fn(block_index, first_item, last_item) must write only to state owned by
// block_index.
template <class Fn>
void parallel_blocks(std::uint64_t n_items, std::uint64_t block_size, Fn&& fn) {
  if (n_items == 0) return;
  const std::uint64_t n_blocks = (n_items + block_size - 1) / block_size;
  const int workers = std::min<std::uint64_t>(worker_count(), n_blocks);
  if (workers <= 1) {
    for (std::uint64_t b = 0; b < n_blocks; ++b)
      fn(b, b * block_size, std::min(n_items, (b + 1) * block_size));
    return;
  }
  std::atomic<std::uint64_t> next{0};
  auto run = [&] {
    for (;;) {
      const std::uint64_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      fn(b, b * block_size, std::min(n_items, (b + 1) * block_size));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
}

}  // namespace pathcurv
