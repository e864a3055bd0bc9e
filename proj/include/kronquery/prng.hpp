#pragma once

#include <cmath>
#include <cstdint>

namespace kronquery {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based stream in the SplitMix64 family.
///
/// Draw k of stream (seed, stream_id) is mix64(key + k * kGoldenGamma) with
/// key = mix64(mix64(seed + kGoldenGamma) ^ mix64(stream_id ^ salt)); the value
/// depends only on (seed, stream_id, k), so equal (seed, stream_id) reproduce
/// the exact sample sequence on any platform with 64-bit integers, and distinct
/// stream_ids give independent streams. Parallel trials take one stream each.
///
/// Gaussian variates use the Marsaglia polar method on top of the uniform
/// stream (no library normal sampler is involved).
class SeededStream {
 public:
  SeededStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed),
        stream_id_(stream_id),
        key_(mix64(mix64(seed + kGoldenGamma) ^
                   mix64(stream_id ^ 0x1F123BB5159A55E5ULL))) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Child stream, independent of this one and of siblings with other tags.
  SeededStream derive(std::uint64_t tag) const {
    return SeededStream(seed_, mix64(stream_id_ ^ mix64(tag + kGoldenGamma)));
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGoldenGamma); }

  /// Uniform in [0, 1) with 53 significand bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (-1, 1).
  double next_symmetric() { return 2.0 * next_double() - 1.0; }

  /// Unbiased uniform integer in [0, bound) by rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  bool next_bit() { return (next_u64() & 1ULL) != 0; }

  /// Standard normal via the polar method; the paired variate is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = next_symmetric();
      v = next_symmetric();
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kronquery
