#include "tagc/sketch.hpp"

#include <cstring>
#include <stdexcept>
#include <string>

#include "tagc/hash.hpp"

namespace tagc {

SketchGeometry sketch_geometry(std::uint32_t n, std::uint32_t ratio, std::uint32_t rows) {
  if (ratio != 2 && ratio != 4 && ratio != 10)
    throw std::invalid_argument("compression ratio must be one of {2, 4, 10}");
  if (rows == 0) throw std::invalid_argument("sketch needs at least one row");
  if (n == 0) throw std::invalid_argument("sketch over an empty vector");
  const std::uint32_t m = n / (ratio * rows);
  if (m == 0)
    throw std::invalid_argument("vector of length " + std::to_string(n) +
                                " is too small for ratio " + std::to_string(ratio) +
                                " with " + std::to_string(rows) + " rows");
  SketchGeometry g;
  g.n = n;
  g.ratio = ratio;
  g.rows = rows;
  g.buckets_per_row = m;
  return g;
}

CountSketch CountSketch::zeros(const SketchGeometry& geom, std::uint64_t seed) {
  CountSketch s;
  s.geom = geom;
  s.seed = seed;
  s.values.assign(static_cast<std::size_t>(geom.rows) * geom.buckets_per_row, 0.0f);
  return s;
}

CountSketch CountSketch::compress(std::span<const float> values, const SketchGeometry& geom,
                                  std::uint64_t seed, kernels::Exec exec) {
  if (values.size() != geom.n)
    throw std::invalid_argument("compress: vector length does not match sketch geometry");
  CountSketch s = zeros(geom, seed);
  const std::uint32_t m = geom.buckets_per_row;
  // Rows are independent output slices; within a row positions are inserted
  // in ascending order, so the parallel path is bit-identical to the serial
  // one for any thread count.
  if (exec == kernels::Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(geom.rows); ++r) {
      const RowHash h(seed, static_cast<std::uint32_t>(r));
      float* row = s.values.data() + static_cast<std::size_t>(r) * m;
      for (std::uint32_t p = 0; p < geom.n; ++p) {
        const float v = values[p];
        if (v != 0.0f) row[h.bucket(p, m)] += h.sign(p) * v;
      }
    }
  } else {
    for (std::uint32_t r = 0; r < geom.rows; ++r) {
      const RowHash h(seed, r);
      float* row = s.values.data() + static_cast<std::size_t>(r) * m;
      for (std::uint32_t p = 0; p < geom.n; ++p) {
        const float v = values[p];
        if (v != 0.0f) row[h.bucket(p, m)] += h.sign(p) * v;
      }
    }
  }
  return s;
}

CountSketch sketch_add(const CountSketch& a, const CountSketch& b) {
  if (!a.compatible(b))
    throw std::invalid_argument("sketch_add: incompatible sketch geometry or seed");
  CountSketch out = a;
  kernels::add_inplace(out.values, b.values, kernels::Exec::serial);
  return out;
}

std::vector<std::uint8_t> CountSketch::to_bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 4);
  for (float f : values) {
    std::uint32_t w;
    std::memcpy(&w, &f, 4);
    out.push_back(static_cast<std::uint8_t>(w));
    out.push_back(static_cast<std::uint8_t>(w >> 8));
    out.push_back(static_cast<std::uint8_t>(w >> 16));
    out.push_back(static_cast<std::uint8_t>(w >> 24));
  }
  return out;
}

nlohmann::ordered_json CountSketch::debug_json() const {
  nlohmann::ordered_json j;
  j["n"] = geom.n;
  j["ratio"] = geom.ratio;
  j["rows"] = geom.rows;
  j["buckets_per_row"] = geom.buckets_per_row;
  j["seed"] = seed;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::uint32_t r = 0; r < geom.rows; ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (std::uint32_t b = 0; b < geom.buckets_per_row; ++b) row.push_back(bucket(r, b));
    rows.push_back(std::move(row));
  }
  j["buckets"] = std::move(rows);
  return j;
}

}  // namespace tagc
