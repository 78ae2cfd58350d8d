#pragma once
// Sketch decompression: exact peeling with an estimation fallback.

#include <cstdint>
#include <span>
#include <vector>

#include "tagc/sketch.hpp"

namespace tagc {

struct DecodeResult {
  std::vector<float> values;             // length n; 0 outside the presence set
  std::vector<std::uint32_t> unresolved; // positions filled by estimation, ascending
  double peeled_fraction = 1.0;          // 1.0 for an empty presence set
};

// Iterative peel over the presence set. Buckets with a single remaining
// contributor yield that position's exact value; its contribution is then
// subtracted from all of its buckets. The worklist is seeded by scanning
// buckets in ascending (row, bucket) order and grows FIFO, which pins the
// float subtraction order and makes results reproducible. Positions the peel
// cannot resolve are filled by estimation_decompress against the residual
// sketch and reported in `unresolved`.
DecodeResult peeling_decompress(std::span<const std::uint32_t> presence,
                                const CountSketch& sketch);

// Median-of-rows count sketch estimator. Returns one value per target, in
// target order. Targets must lie inside the presence set.
std::vector<float> estimation_decompress(std::span<const std::uint32_t> presence,
                                         const CountSketch& sketch,
                                         std::span<const std::uint32_t> targets);

}  // namespace tagc
