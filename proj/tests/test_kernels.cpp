#include <doctest.h>

#include <cstring>
#include <vector>

#include "helpers.hpp"
#include "tagc/hash.hpp"
#include "tagc/kernels.hpp"

using namespace tagc;
using kernels::Exec;
using testing_oracles::bit_equal;

namespace {

std::vector<float> rand_vec(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.next_double() * 4.0 - 2.0);
  return v;
}

// Plain triple loop, the matmul oracle.
std::vector<float> naive_matmul(const std::vector<float>& a, const std::vector<float>& b,
                                std::size_t m, std::size_t k, std::size_t n) {
  std::vector<float> c(m * n, 0.0f);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < k; ++kk)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += a[i * k + kk] * b[kk * n + j];
  return c;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("serial and parallel paths are bit-identical") {
  Rng rng(101);
  for (std::size_t n : {1u, 7u, 32u, 1023u, 4096u}) {
    const auto a = rand_vec(n, rng);
    const auto b = rand_vec(n, rng);

    auto d1 = a, d2 = a;
    kernels::add_inplace(d1, b, Exec::serial);
    kernels::add_inplace(d2, b, Exec::parallel);
    CHECK(bit_equal(d1, d2));

    std::vector<std::vector<float>> inputs;
    for (int r = 0; r < 5; ++r) inputs.push_back(rand_vec(n, rng));
    std::vector<float> s1(n), s2(n);
    kernels::rank_sum(s1, inputs, Exec::serial);
    kernels::rank_sum(s2, inputs, Exec::parallel);
    CHECK(bit_equal(s1, s2));

    std::vector<float> sp1(n), sp2(n), r1(n), r2(n);
    kernels::threshold_split(a, 0.5f, sp1, r1, Exec::serial);
    kernels::threshold_split(a, 0.5f, sp2, r2, Exec::parallel);
    CHECK(bit_equal(sp1, sp2));
    CHECK(bit_equal(r1, r2));
  }
}

TEST_CASE("matmul variants match the naive oracle") {
  Rng rng(7);
  const std::size_t m = 9, k = 13, n = 11;
  const auto a = rand_vec(m * k, rng);
  const auto b = rand_vec(k * n, rng);
  const auto want = naive_matmul(a, b, m, k, n);

  std::vector<float> c(m * n);
  kernels::matmul(a.data(), b.data(), c.data(), m, k, n);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(testing_oracles::rel_err(c[i], want[i], 1e-6) < 1e-5);

  // A * B == A * (B^T)^T via matmul_nt with B stored transposed.
  std::vector<float> bt(n * k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + i] = b[i * n + j];
  std::vector<float> c2(m * n);
  kernels::matmul_nt(a.data(), bt.data(), c2.data(), m, k, n);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(testing_oracles::rel_err(c2[i], want[i], 1e-6) < 1e-5);

  // A^T path: C[k x n] = A^T[k x m] * B2[m x n] with A stored as [m x k].
  const auto b2 = rand_vec(m * n, rng);
  std::vector<float> at(k * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) at[j * m + i] = a[i * k + j];
  const auto want_tn = naive_matmul(at, b2, k, m, n);
  std::vector<float> c3(k * n);
  kernels::matmul_tn(a.data(), b2.data(), c3.data(), m, k, n);
  for (std::size_t i = 0; i < c3.size(); ++i)
    CHECK(testing_oracles::rel_err(c3[i], want_tn[i], 1e-6) < 1e-5);
}

TEST_CASE("matmul beta accumulates") {
  Rng rng(21);
  const std::size_t m = 4, k = 5, n = 3;
  const auto a = rand_vec(m * k, rng);
  const auto b = rand_vec(k * n, rng);
  const auto base = rand_vec(m * n, rng);
  auto c = base;
  kernels::matmul(a.data(), b.data(), c.data(), m, k, n, 1.0f);
  const auto prod = naive_matmul(a, b, m, k, n);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(c[i] == doctest::Approx(base[i] + prod[i]).epsilon(1e-5));
}

TEST_CASE("matmul parallel is bit-identical to serial") {
  Rng rng(33);
  const std::size_t m = 37, k = 29, n = 41;
  const auto a = rand_vec(m * k, rng);
  const auto b = rand_vec(k * n, rng);
  std::vector<float> c1(m * n), c2(m * n);
  kernels::matmul(a.data(), b.data(), c1.data(), m, k, n, 0.0f, Exec::serial);
  kernels::matmul(a.data(), b.data(), c2.data(), m, k, n, 0.0f, Exec::parallel);
  CHECK(bit_equal(c1, c2));
  const auto b2 = rand_vec(m * n, rng);  // matmul_tn reads B as [m x n]
  std::vector<float> t1(k * n), t2(k * n);
  kernels::matmul_tn(a.data(), b2.data(), t1.data(), m, k, n, 0.0f, Exec::serial);
  kernels::matmul_tn(a.data(), b2.data(), t2.data(), m, k, n, 0.0f, Exec::parallel);
  CHECK(bit_equal(t1, t2));
  const auto bt = rand_vec(n * k, rng);  // matmul_nt reads B as [n x k]
  std::vector<float> u1(m * n), u2(m * n);
  kernels::matmul_nt(a.data(), bt.data(), u1.data(), m, k, n, 0.0f, Exec::serial);
  kernels::matmul_nt(a.data(), bt.data(), u2.data(), m, k, n, 0.0f, Exec::parallel);
  CHECK(bit_equal(u1, u2));
}

TEST_CASE("threshold_split keeps negative zero on the residual side") {
  std::vector<float> g = {-0.0f, 1.0f, -2.0f, 0.0f};
  std::vector<float> sparse(4), residual(4);
  kernels::threshold_split(g, 0.0f, sparse, residual);
  CHECK(testing_oracles::exact_partition(g, sparse, residual));
  CHECK(sparse[1] == 1.0f);
  CHECK(sparse[2] == -2.0f);
  CHECK(residual[1] == 0.0f);
}

TEST_CASE("wrapping word sums carry naturally") {
  std::vector<std::vector<std::uint32_t>> inputs = {{0xFFFFFFFFu, 1u}, {1u, 2u}};
  std::vector<std::uint32_t> out(2);
  kernels::rank_sum_words(out, inputs, Exec::serial);
  CHECK(out[0] == 0u);  // wraps
  CHECK(out[1] == 3u);
  std::vector<std::uint32_t> out_par(2);
  kernels::rank_sum_words(out_par, inputs, Exec::parallel);
  CHECK(out == out_par);
}

TEST_CASE("length mismatches are rejected") {
  std::vector<float> a(4), b(5);
  CHECK_THROWS_AS(kernels::add_inplace(a, b), std::invalid_argument);
  std::vector<std::vector<float>> inputs = {std::vector<float>(4), std::vector<float>(3)};
  std::vector<float> out(4);
  CHECK_THROWS_AS(kernels::rank_sum(out, inputs), std::invalid_argument);
}

}  // TEST_SUITE
