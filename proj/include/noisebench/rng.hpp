#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace noisebench {

// SplitMix64 stream. 64-bit state, period 2^64, passes BigCrush; cheap enough
// to derive one stream per image so results do not depend on iteration order
// or worker count.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1), 53-bit resolution
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0,n) via multiply-high; bias is < n/2^64
  std::uint32_t next_below(std::uint32_t n) {
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool next_bool() { return (next_u64() >> 63) != 0; }

  // standard normal, Box-Muller with the second draw cached
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Key for the substream identified by (master seed, purpose tag, index).
// FNV-1a over the tag and operands, then a final avalanche so that nearby
// (seed, index) pairs decorrelate.
inline std::uint64_t stream_key(std::uint64_t master_seed, std::string_view purpose,
                                std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_byte = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (char c : purpose) mix_byte(static_cast<std::uint8_t>(c));
  for (int i = 0; i < 8; ++i) mix_byte(static_cast<std::uint8_t>(master_seed >> (8 * i)));
  for (int i = 0; i < 8; ++i) mix_byte(static_cast<std::uint8_t>(index >> (8 * i)));
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

inline RngStream substream(std::uint64_t master_seed, std::string_view purpose,
                           std::uint64_t index = 0) {
  return RngStream(stream_key(master_seed, purpose, index));
}

}  // namespace noisebench
