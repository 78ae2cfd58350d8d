#include "tagc/decode.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "tagc/hash.hpp"

namespace tagc {

namespace {

void check_presence_bounds(std::span<const std::uint32_t> presence, const CountSketch& sketch) {
  for (std::uint32_t p : presence) {
    if (p >= sketch.geom.n)
      throw std::invalid_argument("presence position out of range for sketch geometry");
  }
}

}  // namespace

std::vector<float> estimation_decompress(std::span<const std::uint32_t> presence,
                                         const CountSketch& sketch,
                                         std::span<const std::uint32_t> targets) {
  check_presence_bounds(presence, sketch);
  std::unordered_set<std::uint32_t> in_presence(presence.begin(), presence.end());
  for (std::uint32_t t : targets) {
    if (!in_presence.count(t))
      throw std::invalid_argument("estimation target outside the presence set");
  }
  const std::uint32_t k = sketch.geom.rows;
  const std::uint32_t m = sketch.geom.buckets_per_row;
  std::vector<RowHash> hashes;
  hashes.reserve(k);
  for (std::uint32_t r = 0; r < k; ++r) hashes.emplace_back(sketch.seed, r);

  std::vector<float> out;
  out.reserve(targets.size());
  std::vector<float> row_est(k);
  for (std::uint32_t t : targets) {
    for (std::uint32_t r = 0; r < k; ++r)
      row_est[r] = hashes[r].sign(t) * sketch.bucket(r, hashes[r].bucket(t, m));
    std::nth_element(row_est.begin(), row_est.begin() + k / 2, row_est.end());
    float est = row_est[k / 2];
    if (est == 0.0f) est = 0.0f;  // canonical zero
    out.push_back(est);
  }
  return out;
}

DecodeResult peeling_decompress(std::span<const std::uint32_t> presence,
                                const CountSketch& sketch) {
  check_presence_bounds(presence, sketch);
  const std::uint32_t k = sketch.geom.rows;
  const std::uint32_t m = sketch.geom.buckets_per_row;

  DecodeResult result;
  result.values.assign(sketch.geom.n, 0.0f);
  if (presence.empty()) {
    result.peeled_fraction = 1.0;
    return result;
  }

  std::vector<RowHash> hashes;
  hashes.reserve(k);
  for (std::uint32_t r = 0; r < k; ++r) hashes.emplace_back(sketch.seed, r);

  // Contributor tracking per bucket: an exact count plus the sum of position
  // ids. When the count drops to 1 the sum IS the remaining position, so no
  // per-bucket lists are needed.
  const std::size_t buckets = static_cast<std::size_t>(k) * m;
  std::vector<std::uint32_t> count(buckets, 0);
  std::vector<std::uint64_t> key_sum(buckets, 0);
  std::vector<float> residual = sketch.values;

  // Bucket indices of each presence entry, densely packed (k per entry).
  std::vector<std::uint32_t> slots(presence.size() * k);
  for (std::size_t i = 0; i < presence.size(); ++i) {
    const std::uint32_t p = presence[i];
    for (std::uint32_t r = 0; r < k; ++r) {
      const std::uint32_t slot = r * m + hashes[r].bucket(p, m);
      slots[i * k + r] = slot;
      count[slot] += 1;
      key_sum[slot] += p;
    }
  }
  std::unordered_map<std::uint32_t, std::size_t> presence_pos;  // position -> entry
  presence_pos.reserve(presence.size() * 2);
  for (std::size_t i = 0; i < presence.size(); ++i) {
    if (!presence_pos.emplace(presence[i], i).second)
      throw std::invalid_argument("presence set contains a duplicate position");
  }

  std::deque<std::uint32_t> worklist;
  for (std::uint32_t slot = 0; slot < buckets; ++slot) {
    if (count[slot] == 1) worklist.push_back(slot);
  }

  std::vector<bool> recovered(presence.size(), false);
  std::size_t peeled = 0;
  while (!worklist.empty()) {
    const std::uint32_t slot = worklist.front();
    worklist.pop_front();
    if (count[slot] != 1) continue;  // stale entry
    const std::uint32_t p = static_cast<std::uint32_t>(key_sum[slot]);
    const std::size_t entry = presence_pos.at(p);
    const std::uint32_t row = slot / m;
    float value = hashes[row].sign(p) * residual[slot];
    if (value == 0.0f) value = 0.0f;  // canonical zero, never -0
    result.values[p] = value;
    recovered[entry] = true;
    ++peeled;
    for (std::uint32_t r = 0; r < k; ++r) {
      const std::uint32_t s = slots[entry * k + r];
      residual[s] -= hashes[r].sign(p) * value;
      count[s] -= 1;
      key_sum[s] -= p;
      if (count[s] == 1) worklist.push_back(s);
    }
  }

  for (std::size_t i = 0; i < presence.size(); ++i) {
    if (!recovered[i]) result.unresolved.push_back(presence[i]);
  }
  std::sort(result.unresolved.begin(), result.unresolved.end());
  result.peeled_fraction = static_cast<double>(peeled) / static_cast<double>(presence.size());

  if (!result.unresolved.empty()) {
    // Estimate against the residual sketch: contributions of everything
    // already peeled have been subtracted out.
    CountSketch rest = sketch;
    rest.values = residual;
    const std::vector<float> est = estimation_decompress(presence, rest, result.unresolved);
    for (std::size_t i = 0; i < result.unresolved.size(); ++i)
      result.values[result.unresolved[i]] = est[i];
  }
  return result;
}

}  // namespace tagc
