#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace fedtrust {

// Deterministic PRNG used everywhere randomness is needed. All draws go
// through hand-rolled conversions (no std:: distributions, whose output is
// implementation-defined), so a (config, seed) pair reproduces bit-identical
// results on any platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    // splitmix64 expansion of the seed into xoshiro256** state
    uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  uint64_t next() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform double in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform double in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n), n > 0; rejection sampling keeps it unbiased
  uint64_t bounded(uint64_t n) {
    if (n <= 1) return 0;
    uint64_t mask = ~uint64_t{0} >> count_leading_zeros(n - 1);
    uint64_t v;
    do {
      v = next() & mask;
    } while (v >= n);
    return v;
  }

  // integer in [lo, hi] inclusive
  int64_t range(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(bounded(static_cast<uint64_t>(hi - lo + 1)));
  }

  // standard normal via Box-Muller; spare value cached per instance
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static int count_leading_zeros(uint64_t x) {
    int n = 0;
    if (x == 0) return 64;
    while (!(x & 0x8000000000000000ULL)) {
      x <<= 1;
      ++n;
    }
    return n;
  }

  uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stable seed derivation: mixes a base seed with a textual tag and indices so
// independent simulation strands never share a stream.
inline uint64_t derive_seed(uint64_t base, std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ULL ^ base;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // final avalanche (splitmix64 finalizer)
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index) {
  return derive_seed(base ^ (0x9e3779b97f4a7c15ULL * (index + 1)), tag);
}

}  // namespace fedtrust
