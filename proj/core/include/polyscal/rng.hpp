#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace polyscal {

/// Counter-based pseudo-random stream: the value at index i depends only on
/// (seed, i), so sample sets are reproducible regardless of thread count or
/// evaluation order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  /// 64-bit hash of (seed, counter); splitmix64 finalizer.
  std::uint64_t bits(std::uint64_t counter) const {
    std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (counter + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0,1). `stream` separates independent coordinates
  /// drawn for the same counter.
  double uniform(std::uint64_t counter, std::uint64_t stream = 0) const {
    std::uint64_t h = bits(counter * 0x100000001b3ULL + 0x632be59bd9b4e019ULL * stream);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Chunked parallel loop over [0, n). The worker function receives disjoint
/// index ranges; results must be accumulated per-range by the caller so the
/// reduction order (and thus the output) is independent of thread count.
inline void parallel_for_ranges(std::size_t n, unsigned workers,
                                const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (workers == 0) workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  const std::size_t chunk = (n + workers - 1) / std::max<std::size_t>(1, workers);
  if (workers <= 1 || n < 2048) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t begin = 0, slot = 0;
  while (begin < n) {
    std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back(fn, slot, begin, end);
    begin = end;
    ++slot;
  }
  for (auto& t : pool) t.join();
}

}  // namespace polyscal
