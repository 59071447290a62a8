#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace biasbench {

// splitmix64: fixed-increment state update followed by two xor-multiply
// mixing rounds. Every seeded draw in the harness goes through this stream
// so any reimplementation reproduces the same sequences.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform draw in [0,1) from the top 53 bits.
  double next_unit() {
    return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
  }

 private:
  std::uint64_t state_;
};

// In-place Fisher-Yates swap from the last index down to index 1. Each bound
// is drawn from a fresh splitmix64 stream seeded with `seed` and reduced to
// the range by taking the draw modulo (i+1).
template <typename T>
void fisher_yates_shuffle(std::vector<T>& items, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (std::size_t i = items.size(); i-- > 1;) {
    std::size_t j = static_cast<std::size_t>(rng.next() % (i + 1));
    std::swap(items[i], items[j]);
  }
}

}  // namespace biasbench
