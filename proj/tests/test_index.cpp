#include <doctest.h>

#include <vector>

#include "tagc/index.hpp"

using namespace tagc;

TEST_SUITE("index") {

TEST_CASE("create marks nonzeros, one field per position") {
  const std::vector<float> v = {0.0f, 1.5f, 0.0f, -2.0f};
  const Index idx = Index::create(v, 4);
  CHECK(idx.field(0) == 0);
  CHECK(idx.field(1) == 1);
  CHECK(idx.field(2) == 0);
  CHECK(idx.field(3) == 1);
  // nibble layout, little-endian within the word
  REQUIRE(idx.words.size() == 1);
  CHECK(idx.words[0] == 0x1010u);
  CHECK(idx.presence() == std::vector<std::uint32_t>{1, 3});
}

TEST_CASE("all-zero vector gives all-zero words") {
  const std::vector<float> v(100, 0.0f);
  const Index idx = Index::create(v, 1);
  for (std::uint32_t w : idx.words) CHECK(w == 0u);
  CHECK(idx.presence().empty());
}

TEST_CASE("negative zero counts as zero") {
  const std::vector<float> v = {-0.0f, 3.0f};
  const Index idx = Index::create(v, 1);
  CHECK(idx.field(0) == 0);
  CHECK(idx.field(1) == 1);
  CHECK(idx.words[0] == 0b10u);
}

TEST_CASE("word array length and trailing bits") {
  for (std::uint32_t n : {1u, 31u, 32u, 33u, 100u}) {
    for (std::uint32_t width : {1u, 4u}) {
      std::vector<float> v(n, 1.0f);
      const Index idx = Index::create(v, width);
      CHECK(idx.words.size() == (static_cast<std::uint64_t>(n) * width + 31) / 32);
      // Bits beyond n*width are zero: sum of fields equals n.
      std::uint64_t fields = 0;
      for (std::uint32_t p = 0; p < n; ++p) fields += idx.field(p);
      CHECK(fields == n);
      const std::uint64_t used = static_cast<std::uint64_t>(n) * width;
      if (used % 32 != 0) {
        const std::uint32_t last = idx.words.back();
        CHECK((last >> (used % 32)) == 0u);
      }
    }
  }
}

TEST_CASE("4-bit merge counts contributors exactly") {
  std::vector<float> a(16, 0.0f), b(16, 0.0f);
  a[7] = 1.0f;
  b[7] = -3.0f;
  const Index ia = Index::create(a, 4), ib = Index::create(b, 4);
  const std::vector<Index> locals = {ia, ib};
  const Index merged = merge_indices(locals);
  CHECK(merged.field(7) == 2);
  CHECK(merged.presence() == std::vector<std::uint32_t>{7});
}

TEST_CASE("1-bit merge carries lose and fabricate positions") {
  // both ranks set position 0 only: bit0 + bit0 carries into bit1
  std::vector<float> a(8, 0.0f), b(8, 0.0f);
  a[0] = 1.0f;
  b[0] = 2.0f;
  const std::vector<Index> locals = {Index::create(a, 1), Index::create(b, 1)};
  const Index merged = merge_indices(locals);
  CHECK(merged.words[0] == 2u);
  CHECK(merged.field(0) == 0);  // lost
  CHECK(merged.field(1) == 1);  // spurious
  CHECK(merged.presence() == std::vector<std::uint32_t>{1});
}

TEST_CASE("4-bit merge of disjoint supports is the union") {
  std::vector<float> a(24, 0.0f), b(24, 0.0f), c(24, 0.0f);
  a[0] = 1.0f;
  a[9] = 1.0f;
  b[3] = 1.0f;
  c[23] = -1.0f;
  const std::vector<Index> locals = {Index::create(a, 4), Index::create(b, 4),
                                     Index::create(c, 4)};
  const Index merged = merge_indices(locals);
  CHECK(merged.presence() == std::vector<std::uint32_t>{0, 3, 9, 23});
}

TEST_CASE("4-bit nibbles saturate exactly at fifteen ranks") {
  std::vector<float> v(8, 0.0f);
  v[2] = 1.0f;
  std::vector<Index> locals(15, Index::create(v, 4));
  const Index merged = merge_indices(locals);
  CHECK(merged.field(2) == 15);
  CHECK(merged.field(1) == 0);  // no carry into the neighbor
  CHECK(merged.field(3) == 0);
  CHECK(merged.presence() == std::vector<std::uint32_t>{2});
  // One more rank overflows into position 3: exactly why W is capped at 15.
  locals.push_back(Index::create(v, 4));
  const Index overflowed = merge_indices(locals);
  CHECK(overflowed.field(2) == 0);
  CHECK(overflowed.field(3) == 1);
}

TEST_CASE("merge rejects mismatched shapes") {
  std::vector<float> a(8, 1.0f), b(9, 1.0f);
  const std::vector<Index> locals = {Index::create(a, 4), Index::create(b, 4)};
  CHECK_THROWS_AS(merge_indices(locals), std::invalid_argument);
  const std::vector<Index> widths = {Index::create(a, 4), Index::create(a, 1)};
  CHECK_THROWS_AS(merge_indices(widths), std::invalid_argument);
}

TEST_CASE("width validation and exact-world bounds") {
  std::vector<float> v(4, 1.0f);
  CHECK_THROWS_AS(Index::create(v, 2), std::invalid_argument);
  CHECK(max_exact_world(4) == 15u);
  CHECK(max_exact_world(1) == 1u);
}

TEST_CASE("payload bits are logical, not padded") {
  std::vector<float> v(100, 1.0f);
  CHECK(Index::create(v, 1).payload_bits() == 100);
  CHECK(Index::create(v, 4).payload_bits() == 400);
}

TEST_CASE("wire bytes are little-endian words") {
  std::vector<float> v(4, 0.0f);
  v[1] = 1.5f;
  v[3] = -2.0f;
  const Index idx = Index::create(v, 4);  // words[0] == 0x1010
  const std::vector<std::uint8_t> bytes = idx.to_bytes();
  CHECK(bytes == std::vector<std::uint8_t>{0x10, 0x10, 0x00, 0x00});
  CHECK(bytes.size() * 8 >= idx.payload_bits());
}

}  // TEST_SUITE
