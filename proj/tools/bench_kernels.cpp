// Serial vs OpenMP kernel comparison. Each kernel is timed on both paths and
// the outputs are checked for bit-equality, since the parallel variants are
// required to be exact re-orderings of the same per-element arithmetic.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tagc/hash.hpp"
#include "tagc/kernels.hpp"
#include "tagc/sketch.hpp"
#include "tagc/sparsify.hpp"

using tagc::kernels::Exec;

namespace {

double now_sec() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<float> random_vec(std::size_t n, tagc::Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.next_double() * 2.0 - 1.0);
  return v;
}

struct Timing {
  double serial = 0.0;
  double parallel = 0.0;
  bool identical = false;
};

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const double t0 = now_sec();
    fn();
    best = std::min(best, now_sec() - t0);
  }
  return best;
}

void report(const char* name, const Timing& t) {
  std::printf("%-16s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   %s\n", name,
              t.serial * 1e3, t.parallel * 1e3, t.serial / t.parallel,
              t.identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = 1u << 22;
  int reps = 5;
  if (argc > 1) n = std::stoul(argv[1]);
  if (argc > 2) reps = std::stoi(argv[2]);
#ifdef _OPENMP
  std::printf("openmp threads: %d, n = %zu\n", omp_get_max_threads(), n);
#else
  std::printf("openmp not enabled, n = %zu\n", n);
#endif

  tagc::Rng rng(7);
  const std::vector<float> a = random_vec(n, rng);
  const std::vector<float> b = random_vec(n, rng);

  {
    Timing t;
    std::vector<float> s1 = a, s2 = a;
    t.serial = time_best_of(reps, [&] { tagc::kernels::add_inplace(s1, b, Exec::serial); });
    t.parallel = time_best_of(reps, [&] { tagc::kernels::add_inplace(s2, b, Exec::parallel); });
    t.identical = std::memcmp(s1.data(), s2.data(), n * sizeof(float)) == 0;
    report("add_inplace", t);
  }
  {
    Timing t;
    std::vector<std::vector<float>> inputs;
    for (int r = 0; r < 4; ++r) inputs.push_back(random_vec(n, rng));
    std::vector<float> o1(n), o2(n);
    t.serial = time_best_of(reps, [&] { tagc::kernels::rank_sum(o1, inputs, Exec::serial); });
    t.parallel =
        time_best_of(reps, [&] { tagc::kernels::rank_sum(o2, inputs, Exec::parallel); });
    t.identical = std::memcmp(o1.data(), o2.data(), n * sizeof(float)) == 0;
    report("rank_sum(x4)", t);
  }
  {
    Timing t;
    std::vector<float> s1(n), s2(n), r1(n), r2(n);
    t.serial = time_best_of(
        reps, [&] { tagc::kernels::threshold_split(a, 0.5f, s1, r1, Exec::serial); });
    t.parallel = time_best_of(
        reps, [&] { tagc::kernels::threshold_split(a, 0.5f, s2, r2, Exec::parallel); });
    t.identical = std::memcmp(s1.data(), s2.data(), n * sizeof(float)) == 0 &&
                  std::memcmp(r1.data(), r2.data(), n * sizeof(float)) == 0;
    report("threshold_split", t);
  }
  {
    // Sketch insertion over a sparsified vector at 90% zeros.
    Timing t;
    tagc::SparsifyResult sp = tagc::sparsify(a, 90.0, Exec::serial);
    const std::uint32_t sn = static_cast<std::uint32_t>(n);
    const tagc::SketchGeometry geom = tagc::sketch_geometry(sn, 4);
    tagc::CountSketch c1, c2;
    t.serial = time_best_of(
        reps, [&] { c1 = tagc::CountSketch::compress(sp.sparse, geom, 99, Exec::serial); });
    t.parallel = time_best_of(
        reps, [&] { c2 = tagc::CountSketch::compress(sp.sparse, geom, 99, Exec::parallel); });
    t.identical =
        std::memcmp(c1.values.data(), c2.values.data(), c1.values.size() * sizeof(float)) == 0;
    report("compress", t);
  }
  {
    const std::size_t m = 256, k = 256, cols = 256;
    std::vector<float> ma = random_vec(m * k, rng), mb = random_vec(k * cols, rng);
    std::vector<float> c1(m * cols), c2(m * cols);
    Timing t;
    t.serial = time_best_of(reps, [&] {
      tagc::kernels::matmul(ma.data(), mb.data(), c1.data(), m, k, cols, 0.0f, Exec::serial);
    });
    t.parallel = time_best_of(reps, [&] {
      tagc::kernels::matmul(ma.data(), mb.data(), c2.data(), m, k, cols, 0.0f, Exec::parallel);
    });
    t.identical = std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(float)) == 0;
    report("matmul 256^3", t);
  }
  return 0;
}
