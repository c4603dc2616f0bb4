#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace lfb {

// Philox4x32-10 counter-based generator. A draw is a pure function of
// (key, counter), so any work unit can compute its own randomness from a
// stream id without coordination; results do not depend on scheduling.
struct Philox4x32 {
  static constexpr uint32_t kMul0 = 0xD2511F53u;
  static constexpr uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<uint32_t, 4> block(std::array<uint32_t, 4> ctr,
                                       std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      uint64_t p0 = static_cast<uint64_t>(kMul0) * ctr[0];
      uint64_t p1 = static_cast<uint64_t>(kMul1) * ctr[2];
      uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
      uint32_t lo0 = static_cast<uint32_t>(p0);
      uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
      uint32_t lo1 = static_cast<uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

// One logical random stream keyed by (seed, stream id). Draw order within
// a stream is the only sequencing that matters.
class KeyedStream {
public:
  KeyedStream(uint64_t seed, uint64_t stream)
      : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
        stream_lo_(static_cast<uint32_t>(stream)),
        stream_hi_(static_cast<uint32_t>(stream >> 32)) {}

  uint32_t next_u32() {
    if (avail_ == 0) refill();
    return buf_[--avail_];
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    uint64_t hi = next_u32();
    uint64_t lo = next_u32();
    uint64_t bits = ((hi << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  }

  // Binomial(trials, p) by direct Bernoulli summation.
  uint64_t binomial(uint64_t trials, double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    uint64_t k = 0;
    for (uint64_t i = 0; i < trials; ++i)
      if (uniform() < p) ++k;
    return k;
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // rejection sampling on 64-bit draws
    uint64_t limit = n * ((~uint64_t{0}) / n);
    for (;;) {
      uint64_t v = (static_cast<uint64_t>(next_u32()) << 32) | next_u32();
      if (v < limit) return v % n;
    }
  }

  double normal() {
    // Box-Muller, one value per pair of uniforms (second discarded)
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

private:
  void refill() {
    buf_ = Philox4x32::block({stream_lo_, stream_hi_,
                              static_cast<uint32_t>(ctr_),
                              static_cast<uint32_t>(ctr_ >> 32)},
                             key_);
    ++ctr_;
    avail_ = 4;
  }

  std::array<uint32_t, 2> key_;
  uint32_t stream_lo_, stream_hi_;
  uint64_t ctr_ = 0;
  std::array<uint32_t, 4> buf_{};
  int avail_ = 0;
};

// Splits a 64-bit seed into a derived seed for an independent purpose.
// Cheap integer hash (splitmix64 finalizer).
inline uint64_t derive_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace lfb
