#include "tagc/kernels.hpp"

#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tagc::kernels {

namespace {

inline void check_equal_len(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

inline std::int64_t ssize_of(std::size_t n) { return static_cast<std::int64_t>(n); }

}  // namespace

void add_inplace(std::span<float> dst, std::span<const float> src, Exec exec) {
  check_equal_len(dst.size(), src.size(), "add_inplace");
  const std::int64_t n = ssize_of(dst.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
  } else {
    for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
  }
}

void scale_sub_inplace(std::span<float> dst, std::span<const float> src, float scale, Exec exec) {
  check_equal_len(dst.size(), src.size(), "scale_sub_inplace");
  const std::int64_t n = ssize_of(dst.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) dst[i] -= scale * src[i];
  } else {
    for (std::int64_t i = 0; i < n; ++i) dst[i] -= scale * src[i];
  }
}

void rank_sum(std::span<float> out, std::span<const std::vector<float>> inputs, Exec exec) {
  const std::size_t w = inputs.size();
  for (const auto& in : inputs) check_equal_len(out.size(), in.size(), "rank_sum");
  const std::int64_t n = ssize_of(out.size());
  // Per element, inputs are folded in ascending rank order; partitioning over
  // elements keeps that order intact on every thread.
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      float acc = 0.0f;
      for (std::size_t r = 0; r < w; ++r) acc += inputs[r][i];
      out[i] = acc;
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      float acc = 0.0f;
      for (std::size_t r = 0; r < w; ++r) acc += inputs[r][i];
      out[i] = acc;
    }
  }
}

void rank_sum_words(std::span<std::uint32_t> out, std::span<const std::vector<std::uint32_t>> inputs,
                    Exec exec) {
  const std::size_t w = inputs.size();
  for (const auto& in : inputs) check_equal_len(out.size(), in.size(), "rank_sum_words");
  const std::int64_t n = ssize_of(out.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      std::uint32_t acc = 0;
      for (std::size_t r = 0; r < w; ++r) acc += inputs[r][i];
      out[i] = acc;
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      std::uint32_t acc = 0;
      for (std::size_t r = 0; r < w; ++r) acc += inputs[r][i];
      out[i] = acc;
    }
  }
}

void threshold_split(std::span<const float> g, float tau, std::span<float> sparse,
                     std::span<float> residual, Exec exec) {
  check_equal_len(g.size(), sparse.size(), "threshold_split");
  check_equal_len(g.size(), residual.size(), "threshold_split");
  const std::int64_t n = ssize_of(g.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const float v = g[i];
      const bool drop = (v <= tau && v >= -tau);
      sparse[i] = drop ? 0.0f : v;
      residual[i] = drop ? v : 0.0f;
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      const float v = g[i];
      const bool drop = (v <= tau && v >= -tau);
      sparse[i] = drop ? 0.0f : v;
      residual[i] = drop ? v : 0.0f;
    }
  }
}

namespace {

// One output row of C = A * B; k-loop order fixed.
inline void matmul_row(const float* a, const float* b, float* c, std::size_t i, std::size_t k,
                       std::size_t n, float beta) {
  float* crow = c + i * n;
  if (beta == 0.0f) {
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0f;
  }
  const float* arow = a + i * k;
  for (std::size_t kk = 0; kk < k; ++kk) {
    const float av = arow[kk];
    if (av == 0.0f) continue;
    const float* brow = b + kk * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void matmul_nt_row(const float* a, const float* b, float* c, std::size_t i, std::size_t k,
                          std::size_t n, float beta) {
  const float* arow = a + i * k;
  float* crow = c + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    const float* brow = b + j * k;
    float acc = 0.0f;
    for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
    crow[j] = (beta == 0.0f) ? acc : crow[j] + acc;
  }
}

// One output row of C[k x n] = A^T * B, i.e. row kk of C gathers A[:, kk].
inline void matmul_tn_row(const float* a, const float* b, float* c, std::size_t kk, std::size_t m,
                          std::size_t k, std::size_t n, float beta) {
  float* crow = c + kk * n;
  if (beta == 0.0f) {
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0f;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const float av = a[i * k + kk];
    if (av == 0.0f) continue;
    const float* brow = b + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

}  // namespace

void matmul(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
            float beta, Exec exec) {
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < ssize_of(m); ++i)
      matmul_row(a, b, c, static_cast<std::size_t>(i), k, n, beta);
  } else {
    for (std::size_t i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n, beta);
  }
}

void matmul_nt(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
               std::size_t n, float beta, Exec exec) {
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < ssize_of(m); ++i)
      matmul_nt_row(a, b, c, static_cast<std::size_t>(i), k, n, beta);
  } else {
    for (std::size_t i = 0; i < m; ++i) matmul_nt_row(a, b, c, i, k, n, beta);
  }
}

void matmul_tn(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
               std::size_t n, float beta, Exec exec) {
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t kk = 0; kk < ssize_of(k); ++kk)
      matmul_tn_row(a, b, c, static_cast<std::size_t>(kk), m, k, n, beta);
  } else {
    for (std::size_t kk = 0; kk < k; ++kk) matmul_tn_row(a, b, c, kk, m, k, n, beta);
  }
}

}  // namespace tagc::kernels
