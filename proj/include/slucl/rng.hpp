#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace slucl {

// Deterministic RNG used everywhere in the project.
//
// The engine is std::mt19937_64, whose output sequence is pinned by the C++
// standard, and all derived draws (uniform reals, bounded ints, gaussians)
// are implemented here rather than with std::*_distribution, which is
// implementation-defined. Corpora and training runs are therefore
// reproducible across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform real in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection sampling.
  std::uint64_t below(std::uint64_t n);

  int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  // Box-Muller without a cached spare draw, so every call consumes exactly
  // two engine outputs regardless of history.
  double gauss(double mean, double stddev);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent substreams from a master
// seed plus stream tags.
std::uint64_t mix64(std::uint64_t x);

// Derive a child seed from (seed, tag, index). Streams for distinct tags or
// indices are effectively independent.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

// FNV-1a over arbitrary bytes; used for config hashes and checkpoint hashes.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t basis = 0xcbf29ce484222325ull);

}  // namespace slucl
