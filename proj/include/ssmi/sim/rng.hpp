#pragma once

// Named random streams derived from one seed, so that e.g. toggling sensor
// noise never shifts environment generation.

#include <cstdint>
#include <random>
#include <string_view>

namespace ssmi::sim {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

using Rng = std::mt19937_64;

class RngStreams {
 public:
  explicit RngStreams(std::uint64_t seed) : seed_(seed) {}

  Rng stream(std::string_view name) const {
    const std::uint64_t h = fnv1a(name);
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace ssmi::sim
