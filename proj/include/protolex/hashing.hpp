#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace protolex {

// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);

// splitmix64 generator. Used everywhere a seeded, platform-independent
// stream is needed (embedding features, shuffles, bootstrap resamples).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();

  // Uniform integer in [0, bound). bound must be > 0.
  std::size_t below(std::size_t bound);

 private:
  std::uint64_t state_;
};

// In-place Fisher-Yates shuffle driven by splitmix64.
template <typename T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = rng.below(i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace protolex
