#include <doctest.h>

#include <cstdint>
#include <vector>

#include "tagc/hash.hpp"

using namespace tagc;

TEST_SUITE("hash") {

TEST_CASE("row hashers are deterministic and independent per row") {
  const RowHash h0(42, 0), h0b(42, 0), h1(42, 1);
  bool any_diff = false;
  for (std::uint32_t p = 0; p < 256; ++p) {
    CHECK(h0.bucket(p, 97) == h0b.bucket(p, 97));
    CHECK(h0.sign(p) == h0b.sign(p));
    if (h0.bucket(p, 97) != h1.bucket(p, 97)) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("buckets stay in range, signs are plus or minus one") {
  for (std::uint64_t seed : {0ull, 1ull, 0xDEADBEEFull}) {
    for (std::uint32_t r = 0; r < 4; ++r) {
      const RowHash h(seed, r);
      int plus = 0;
      for (std::uint32_t p = 0; p < 2000; ++p) {
        CHECK(h.bucket(p, 13) < 13);
        const float s = h.sign(p);
        CHECK((s == 1.0f || s == -1.0f));
        if (s == 1.0f) ++plus;
      }
      // fair-ish coin
      CHECK(plus > 700);
      CHECK(plus < 1300);
    }
  }
}

TEST_CASE("bucket distribution is roughly uniform") {
  const RowHash h(7, 0);
  const std::uint32_t m = 16;
  std::vector<int> counts(m, 0);
  const int n = 16000;
  for (int p = 0; p < n; ++p) counts[h.bucket(p, m)] += 1;
  for (int c : counts) {
    CHECK(c > n / m / 2);
    CHECK(c < n / m * 2);
  }
}

// The coefficient derivation is wire format: these values must never change.
TEST_CASE("hash family golden values") {
  CHECK(splitmix64(0) == 0xE220A8397B1DCDAFull);
  CHECK(splitmix64(1) == 0x910A2DEC89025CC1ull);
  const RowHash h(0x1234, 0);
  CHECK(h.bucket(0, 1000) == 289u);
  CHECK(h.bucket(1, 1000) == 536u);
  CHECK(h.bucket(12345, 1000) == 285u);
  CHECK(h.sign(0) == 1.0f);
  CHECK(h.sign(1) == -1.0f);
}

}  // TEST_SUITE
