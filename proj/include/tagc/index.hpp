#pragma once
// Packed presence map over gradient positions.
//
// Position p occupies bits [p*width, (p+1)*width) of the flat bit stream,
// little-endian within each 32-bit word. Merging across ranks is plain
// integer addition of the words (what an All-Reduce sum does to the packed
// payload): with width=4 the nibble holds an exact contributor count for up
// to 15 ranks; with width=1 binary carries can clear true positions and set
// spurious ones, which is the documented instability of that mode.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace tagc {

struct Index {
  std::uint32_t n = 0;      // number of positions
  std::uint32_t width = 4;  // bits per position, 1 or 4
  std::vector<std::uint32_t> words;

  // One field per position; 1 iff values[p] != 0 (negative zero counts as zero).
  static Index create(std::span<const float> values, std::uint32_t width);

  // An all-zero index of the right shape.
  static Index zeros(std::uint32_t n, std::uint32_t width);

  std::uint32_t field(std::uint32_t p) const;

  // Positions considered present. For a pre-merge index this is exactly the
  // nonzero set; for a summed one it follows the merge semantics above
  // (width=4: field > 0, width=1: bit == 1).
  std::vector<std::uint32_t> presence() const;

  // Logical payload size; the word array pads this up to a multiple of 32.
  std::uint64_t payload_bits() const { return static_cast<std::uint64_t>(n) * width; }

  // Wire format: the packed words, each serialized little-endian.
  std::vector<std::uint8_t> to_bytes() const;

  nlohmann::ordered_json debug_json() const;

  bool operator==(const Index&) const = default;
};

// Word-wise integer sum with natural carries, as produced by the collectives.
Index merge_indices(std::span<const Index> locals);

// Largest world size whose merged index is still exact for the given width.
// 4-bit nibbles count up to 15 contributors; 1-bit mode is never exact for
// overlapping supports, so only a single rank is safe.
std::uint32_t max_exact_world(std::uint32_t width);

std::uint32_t words_needed(std::uint32_t n, std::uint32_t width);

}  // namespace tagc
