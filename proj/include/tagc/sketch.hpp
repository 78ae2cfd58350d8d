#pragma once
// Count sketch over 32-bit float gradient values.
//
// The sketch is homomorphic under bucket-wise addition: the sum of two
// sketches equals the sketch of the summed vectors, which is what lets a
// plain sum collective reduce compressed gradients. Layout is row-major
// (rows x buckets_per_row), geometry and seed form the compatibility key.

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "tagc/kernels.hpp"

namespace tagc {

inline constexpr std::uint32_t kDefaultSketchRows = 3;

struct SketchGeometry {
  std::uint32_t n = 0;               // original vector length
  std::uint32_t ratio = 2;           // compression ratio r, one of {2, 4, 10}
  std::uint32_t rows = kDefaultSketchRows;
  std::uint32_t buckets_per_row = 0; // m = floor(n / (ratio * rows))

  bool operator==(const SketchGeometry&) const = default;
};

// Derives the sketch layout for a vector of length n at the given ratio.
// Throws if the vector is too small to give every row at least one bucket.
SketchGeometry sketch_geometry(std::uint32_t n, std::uint32_t ratio,
                               std::uint32_t rows = kDefaultSketchRows);

struct CountSketch {
  SketchGeometry geom;
  std::uint64_t seed = 0;
  std::vector<float> values;  // rows x buckets_per_row, row-major

  static CountSketch zeros(const SketchGeometry& geom, std::uint64_t seed);

  // Inserts every nonzero of `values` into all rows:
  //   bucket[r][pos_hash(seed,r,p) % m] += sign_hash(seed,r,p) * values[p]
  static CountSketch compress(std::span<const float> values, const SketchGeometry& geom,
                              std::uint64_t seed,
                              kernels::Exec exec = kernels::Exec::parallel);

  bool compatible(const CountSketch& other) const {
    return geom == other.geom && seed == other.seed;
  }

  float bucket(std::uint32_t row, std::uint32_t b) const {
    return values[static_cast<std::size_t>(row) * geom.buckets_per_row + b];
  }

  std::uint64_t payload_bits() const { return static_cast<std::uint64_t>(values.size()) * 32; }

  // Wire format: row-major buckets, each float serialized little-endian.
  std::vector<std::uint8_t> to_bytes() const;

  nlohmann::ordered_json debug_json() const;
};

// Element-wise float sum of bucket arrays; rejects incompatible sketches.
CountSketch sketch_add(const CountSketch& a, const CountSketch& b);

}  // namespace tagc
