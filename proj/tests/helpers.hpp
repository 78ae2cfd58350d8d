#pragma once
// Independent reference implementations the tests check the library against.
// These deliberately avoid the library's kernel/codec code paths: plain loops
// and full sorts only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "tagc/hash.hpp"
#include "tagc/sketch.hpp"

namespace testing_oracles {

// Rank-ordered elementwise sum, the uncompressed reference for every decode.
inline std::vector<float> reference_sum(const std::vector<std::vector<float>>& per_rank) {
  std::vector<float> out(per_rank.at(0).size(), 0.0f);
  for (const auto& v : per_rank) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return out;
}

// Scalar re-derivation of sketch contents: one (row, position) pair at a
// time, against the published hash family.
inline std::vector<float> sketch_oracle(std::span<const float> values,
                                        const tagc::SketchGeometry& geom, std::uint64_t seed) {
  std::vector<float> buckets(static_cast<std::size_t>(geom.rows) * geom.buckets_per_row, 0.0f);
  for (std::uint32_t r = 0; r < geom.rows; ++r) {
    const tagc::RowHash h(seed, r);
    for (std::uint32_t p = 0; p < geom.n; ++p) {
      if (values[p] == 0.0f) continue;
      buckets[static_cast<std::size_t>(r) * geom.buckets_per_row + h.bucket(p, geom.buckets_per_row)] +=
          h.sign(p) * values[p];
    }
  }
  return buckets;
}

// Full-sort threshold: the c-th smallest magnitude (1-indexed), 0 when c==0.
inline float sort_threshold_oracle(std::span<const float> g, double theta) {
  const std::size_t n = g.size();
  std::size_t c = static_cast<std::size_t>(std::ceil(theta * static_cast<double>(n) / 100.0));
  if (c > n) c = n;
  if (c == 0) return 0.0f;
  std::vector<float> mags(n);
  for (std::size_t i = 0; i < n; ++i) mags[i] = std::fabs(g[i]);
  std::sort(mags.begin(), mags.end());
  return mags[c - 1];
}

inline bool bit_equal(float a, float b) {
  std::uint32_t ua, ub;
  std::memcpy(&ua, &a, 4);
  std::memcpy(&ub, &b, 4);
  return ua == ub;
}

inline bool bit_equal(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!bit_equal(a[i], b[i])) return false;
  }
  return true;
}

// Exact split check: every element went wholly to exactly one side.
inline bool exact_partition(std::span<const float> input, std::span<const float> sparse,
                            std::span<const float> residual) {
  if (input.size() != sparse.size() || input.size() != residual.size()) return false;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const bool kept = bit_equal(sparse[i], input[i]) && bit_equal(residual[i], 0.0f);
    const bool dropped = bit_equal(residual[i], input[i]) && bit_equal(sparse[i], 0.0f);
    if (!kept && !dropped) return false;
  }
  return true;
}

inline double rel_err(double got, double want, double floor = 1e-20) {
  return std::fabs(got - want) / std::max(std::fabs(want), floor);
}

}  // namespace testing_oracles
