#pragma once
// Deterministic hash family for sketch bucket placement and signs.
//
// Multiply-add-shift hashing with per-(seed, row) coefficients. The family is
// part of the wire format: a sketch produced with one seed can only be decoded
// against the same seed, and the exact coefficient derivation below must not
// change between releases (golden values are pinned in the unit tests).

#include <cmath>
#include <cstdint>
#include <span>

namespace tagc {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Per-row hasher derived from (seed, row). bucket() maps a position to
// [0, m); sign() yields +-1. Both are pure and cheap enough to recompute
// instead of caching.
class RowHash {
 public:
  constexpr RowHash(std::uint64_t seed, std::uint32_t row) {
    std::uint64_t s = splitmix64(seed ^ (0xA24BAED4963EE407ULL * (row + 1)));
    pos_a_ = splitmix64(s) | 1ULL;  // odd multiplier
    pos_b_ = splitmix64(pos_a_);
    sgn_a_ = splitmix64(pos_b_) | 1ULL;
    sgn_b_ = splitmix64(sgn_a_);
  }

  constexpr std::uint32_t bucket(std::uint32_t position, std::uint32_t m) const {
    std::uint64_t h = pos_a_ * (static_cast<std::uint64_t>(position) + 0x9E3779B9ULL) + pos_b_;
    return static_cast<std::uint32_t>((h >> 32) % m);
  }

  constexpr float sign(std::uint32_t position) const {
    std::uint64_t h = sgn_a_ * (static_cast<std::uint64_t>(position) + 0x85EBCA77ULL) + sgn_b_;
    return (h >> 63) ? 1.0f : -1.0f;
  }

 private:
  std::uint64_t pos_a_ = 0, pos_b_ = 0, sgn_a_ = 0, sgn_b_ = 0;
};

// Small deterministic PRNG used everywhere randomness is needed. Keeping the
// generator self-contained makes run outputs byte-reproducible across
// standard library versions.
class Rng {
 public:
  explicit constexpr Rng(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next_u64() { return splitmix64(state_++); }

  std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, bound)
  std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

 private:
  std::uint64_t state_;
};

// Standard normal via Box-Muller.
inline double rng_normal(Rng& rng) {
  double u1 = rng.next_double();
  while (u1 <= 0.0) u1 = rng.next_double();
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
}

inline std::uint64_t fnv1a64(std::span<const char> bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace tagc
