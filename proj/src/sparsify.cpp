#include "tagc/sparsify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tagc {

std::vector<float> apply_accumulator(std::span<const float> g, const ResidualAccumulator& acc,
                                     kernels::Exec exec) {
  if (g.size() != acc.values.size())
    throw std::invalid_argument("apply_accumulator: accumulator length mismatch");
  std::vector<float> out(g.begin(), g.end());
  kernels::add_inplace(out, acc.values, exec);
  return out;
}

SparsifyResult sparsify(std::span<const float> g, double theta, kernels::Exec exec) {
  if (!(theta >= 0.0 && theta <= 100.0))
    throw std::invalid_argument("sparsification threshold must lie in [0, 100]");
  if (g.empty()) throw std::invalid_argument("sparsify: empty gradient");
  const std::size_t n = g.size();

  std::vector<float> mags(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(g[i])) throw std::invalid_argument("sparsify: NaN gradient value");
    mags[i] = std::fabs(g[i]);
  }

  std::size_t c = static_cast<std::size_t>(std::ceil(theta * static_cast<double>(n) / 100.0));
  if (c > n) c = n;

  float tau = 0.0f;
  if (c > 0) {
    std::nth_element(mags.begin(), mags.begin() + (c - 1), mags.end());
    tau = mags[c - 1];
  }

  SparsifyResult res;
  res.sparse.resize(n);
  res.residual.resize(n);
  res.tau = tau;
  kernels::threshold_split(g, tau, res.sparse, res.residual, exec);
  res.zero_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (res.sparse[i] == 0.0f) ++res.zero_count;
  }
  return res;
}

}  // namespace tagc
