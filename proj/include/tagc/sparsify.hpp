#pragma once
// Dynamic magnitude sparsification with exact residual carry.
//
// sparsify() zeroes at least theta% of the entries by smallest magnitude and
// hands every zeroed value to the residual, element-copied rather than
// recomputed, so (sparse, residual) is an exact partition of the input.
// apply_accumulator() adds the residual back before the next step.

#include <cstddef>
#include <span>
#include <vector>

#include "tagc/kernels.hpp"

namespace tagc {

struct ResidualAccumulator {
  std::vector<float> values;

  explicit ResidualAccumulator(std::size_t n) : values(n, 0.0f) {}
};

std::vector<float> apply_accumulator(std::span<const float> g, const ResidualAccumulator& acc,
                                     kernels::Exec exec = kernels::Exec::parallel);

struct SparsifyResult {
  std::vector<float> sparse;
  std::vector<float> residual;
  float tau = 0.0f;         // magnitude threshold actually applied
  std::size_t zero_count = 0;
};

// theta is a percentage in [0, 100]; the threshold tau is the
// ceil(theta*n/100)-th smallest |g| (0 when that count is 0), found by
// expected-O(n) selection. Entries with |g| <= tau are zeroed, so ties at tau
// may push the zero count above the requested minimum. NaN input is rejected.
SparsifyResult sparsify(std::span<const float> g, double theta,
                        kernels::Exec exec = kernels::Exec::parallel);

}  // namespace tagc
