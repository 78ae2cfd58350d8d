#pragma once
// Data-parallel inner loops shared by the codec, the collectives, and the
// trainer. Every kernel has a serial reference path and an OpenMP path that
// must produce bit-identical results: parallel variants partition output
// elements (or rows) and keep each element's accumulation order fixed, so
// float results do not depend on the thread count. tools/bench_kernels.cpp
// compares the two paths.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tagc::kernels {

enum class Exec { serial, parallel };

// dst[i] += src[i]
void add_inplace(std::span<float> dst, std::span<const float> src, Exec exec = Exec::parallel);

// dst[i] -= scale * src[i]
void scale_sub_inplace(std::span<float> dst, std::span<const float> src, float scale,
                       Exec exec = Exec::parallel);

// out[i] = sum over inputs (ascending input order) of inputs[r][i]
void rank_sum(std::span<float> out, std::span<const std::vector<float>> inputs,
              Exec exec = Exec::parallel);

// Same over packed words; wrapping unsigned addition with natural carries.
void rank_sum_words(std::span<std::uint32_t> out, std::span<const std::vector<std::uint32_t>> inputs,
                    Exec exec = Exec::parallel);

// sparse[i] = |g[i]| <= tau ? 0 : g[i];  residual gets the complementary copy.
// Each element is copied, never recomputed, so sparse + residual == g bit-exactly.
void threshold_split(std::span<const float> g, float tau, std::span<float> sparse,
                     std::span<float> residual, Exec exec = Exec::parallel);

// Row-major matmuls used by the trainer. beta=0 overwrites C, beta=1 accumulates.
// C[m x n] = A[m x k] * B[k x n]
void matmul(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
            float beta = 0.0f, Exec exec = Exec::parallel);
// C[m x n] = A[m x k] * B[n x k]^T
void matmul_nt(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
               std::size_t n, float beta = 0.0f, Exec exec = Exec::parallel);
// C[k x n] = A[m x k]^T * B[m x n]
void matmul_tn(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
               std::size_t n, float beta = 0.0f, Exec exec = Exec::parallel);

}  // namespace tagc::kernels
