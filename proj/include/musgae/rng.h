// Deterministic, splittable random numbers.
//
// The generator is counter based: output i of a stream keyed by `key` is
// mix64(key + i * 0x9E3779B97F4A7C15), where mix64 is the SplitMix64
// finalizer. The state is the pair (key, counter), so copying an Rng
// snapshots it and split() derives independent child streams without
// touching the parent. All derived distributions are implemented here
// (not via <random>) so that a seed reproduces the same values on every
// platform and standard library.

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace musgae {

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : key_(mix64(seed ^ 0x6A09E667F3BCC909ULL)) {}

  uint64_t seed_key() const { return key_; }
  uint64_t counter() const { return counter_; }

  uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] (inclusive).
  int64_t uniform_int(int64_t lo, int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; one value per call.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child stream; the parent state is unchanged.
  Rng split(uint64_t tag) const;
  Rng split(std::string_view tag) const;

  // Fisher-Yates shuffle of [0, n).
  std::vector<size_t> permutation(size_t n);

  static uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  Rng(uint64_t key, bool) : key_(key) {}

  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace musgae
