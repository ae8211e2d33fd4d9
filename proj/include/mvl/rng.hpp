#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace mvl {

// Counter-based generator: draw i of stream (seed, stream) is a pure hash of
// (seed, stream, i), so the sequence is identical on every platform and
// independent sub-streams can be split off without sharing state.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : seed_(seed), stream_(stream), key_(derive_key(seed, stream)) {}

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

  uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), unbiased via rejection.
  uint64_t below(uint64_t n) {
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller; two draws per call, no caching so the
  // draw count per call is fixed.
  double normal() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Independent derived stream; children of distinct parents do not collide.
  Rng split(uint64_t substream) const {
    return Rng(seed_, mix64(stream_ + kGamma) ^ mix64(substream ^ kLeaf));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr uint64_t kGamma = 0x9e3779b97f4a7c15ull;
  static constexpr uint64_t kLeaf = 0xda942042e4dd58b5ull;
  static constexpr double kPi = 3.141592653589793238462643383279502884;

  // SplitMix64 finalizer.
  static uint64_t mix64(uint64_t x) {
    x += kGamma;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  static uint64_t derive_key(uint64_t seed, uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream ^ kLeaf));
  }

  uint64_t seed_;
  uint64_t stream_;
  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace mvl
