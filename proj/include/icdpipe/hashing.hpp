#pragma once

// Deterministic hashing and random draws. std::hash and the standard
// distributions are implementation-defined, so everything that must be
// reproducible across platforms goes through these instead.

#include <cstdint>
#include <string_view>

namespace icdpipe {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of (seed, bytes); the basis of every mock-client output.
inline std::uint64_t seeded_hash(std::uint64_t seed, std::string_view bytes) {
  return splitmix64(splitmix64(seed) ^ fnv1a64(bytes));
}

/// Map a 64-bit hash to a double in (0, 1].
inline double unit_double(std::uint64_t h) {
  return (static_cast<double>(h >> 11) + 1.0) / 9007199254740993.0;  // 2^53 + 1
}

/// Counter-based deterministic RNG (splitmix64 stream).
class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  /// Uniform integer in [0, n). Lemire reduction, no modulo bias worth
  /// caring about at these ranges.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  /// Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next() >> 11) / 9007199254740992.0;  // 2^53
  }

 private:
  std::uint64_t state_;
};

}  // namespace icdpipe
