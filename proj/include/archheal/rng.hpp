#pragma once

#include <cstdint>

namespace archheal {

// Splitmix-style 64-bit generator. One instance per reproducible stream;
// identical seeds yield identical sequences on every platform.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform-ish in [0, n); n must be positive.
  std::uint64_t next_below(std::uint64_t n) { return next() % n; }

private:
  std::uint64_t state_;
};

}  // namespace archheal
