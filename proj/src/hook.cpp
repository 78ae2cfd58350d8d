#include "tagc/hook.hpp"

#include <algorithm>
#include <stdexcept>

#include "tagc/decode.hpp"
#include "tagc/index.hpp"
#include "tagc/kernels.hpp"
#include "tagc/sketch.hpp"

namespace tagc {

PeelStats& PeelStats::operator+=(const PeelStats& o) {
  presence += o.presence;
  peeled += o.peeled;
  unresolved += o.unresolved;
  index_lost += o.index_lost;
  index_spurious += o.index_spurious;
  compressed_segments += o.compressed_segments;
  baseline_segments += o.baseline_segments;
  return *this;
}

double PeelStats::index_collision_rate() const {
  const std::uint64_t truth = presence + index_lost - index_spurious;  // true union size
  if (truth == 0) return 0.0;
  return static_cast<double>(index_lost + index_spurious) / static_cast<double>(truth);
}

std::vector<ShardSpec> make_shards(const std::vector<LayerSpec>& layers,
                                   std::uint32_t shard_count, std::uint32_t world_size) {
  if (shard_count == 0) throw std::invalid_argument("need at least one shard");
  if (world_size == 0) throw std::invalid_argument("world size must be at least 1");
  std::uint64_t total = 0;
  for (const LayerSpec& l : layers) total += l.param_count;
  if (total == 0) throw std::invalid_argument("no parameters to shard");
  const std::uint64_t shard_len = (total + shard_count - 1) / shard_count;

  std::vector<ShardSpec> shards(shard_count);
  for (std::uint32_t s = 0; s < shard_count; ++s) {
    shards[s].id = s;
    shards[s].owner = s % world_size;
    shards[s].begin = static_cast<std::uint64_t>(s) * shard_len;
    shards[s].end = shards[s].begin + shard_len;
  }

  std::uint64_t off = 0;
  for (const LayerSpec& l : layers) {
    const std::uint64_t lb = off, le = off + l.param_count;
    for (ShardSpec& sh : shards) {
      const std::uint64_t b = std::max(lb, sh.begin);
      const std::uint64_t e = std::min(le, sh.end);
      if (b < e) sh.segments.push_back({l.name, l.kind, b, e});
    }
    off = le;
  }
  // Alignment padding in the last shard exchanges as raw zeros.
  ShardSpec& last = shards.back();
  if (total < last.end) last.segments.push_back({"pad", LayerKind::other, total, last.end});
  return shards;
}

namespace {

void check_shard_inputs(const ShardSpec& shard, std::span<const std::vector<float>> grads,
                        std::uint32_t world_size) {
  if (grads.size() != world_size)
    throw std::invalid_argument("need one gradient slice per rank");
  for (const auto& g : grads) {
    if (g.size() != shard.size())
      throw std::invalid_argument("gradient slice length does not match the shard");
  }
  if (shard.owner >= world_size) throw std::invalid_argument("shard owner rank out of range");
}

// Raw exchange of one [begin, end) range: the shard's slice of a global
// Reduce-Scatter (the owner's receive count is the whole range).
std::vector<float> exchange_raw(std::span<const std::vector<float>> per_rank_values,
                                std::uint32_t owner, World& world, const std::string& tag,
                                std::uint64_t params) {
  std::vector<std::size_t> counts(world.size(), 0);
  counts[owner] = per_rank_values[0].size();
  auto slices =
      world.reduce_scatter(per_rank_values, counts, Traffic{tag, params, std::nullopt});
  return std::move(slices[owner]);
}

}  // namespace

std::vector<float> baseline_reduce_shard(const ShardSpec& shard,
                                         std::span<const std::vector<float>> per_rank_grads,
                                         World& world) {
  check_shard_inputs(shard, per_rank_grads, world.size());
  return exchange_raw(per_rank_grads, shard.owner, world,
                      "grad/shard" + std::to_string(shard.id), shard.size());
}

ShardReduceResult tagc_reduce_shard(const ShardSpec& shard,
                                    std::span<const std::vector<float>> per_rank_grads,
                                    std::span<ResidualAccumulator> accumulators,
                                    const CompressionConfig& config, World& world,
                                    bool collect_audit) {
  const std::uint32_t w = world.size();
  check_shard_inputs(shard, per_rank_grads, w);
  config.validate_for_world(w);
  if (accumulators.size() != w)
    throw std::invalid_argument("need one accumulator per rank");
  for (const auto& acc : accumulators) {
    if (acc.values.size() != shard.size())
      throw std::invalid_argument("accumulator length does not match the shard");
  }

  ShardReduceResult result;
  std::vector<float> decoded(shard.size(), 0.0f);
  if (collect_audit) result.audit_exchanged_sum.emplace(shard.size(), 0.0f);

  for (const LayerSegment& seg : shard.segments) {
    const std::uint64_t lo = seg.begin - shard.begin;
    const std::uint64_t len = seg.size();
    const bool flagged = kind_compressible(seg.kind, config.policy, config.include_out_proj);
    const bool compressed =
        flagged && config.ratio > 1 && len >= config.min_compress_segment;
    const std::string seg_tag = "shard" + std::to_string(shard.id) + "/" + seg.name;

    if (!compressed) {
      // Raw path: no sparsification, accumulator slice untouched.
      std::vector<std::vector<float>> slices(w);
      for (std::uint32_t r = 0; r < w; ++r) {
        slices[r].assign(per_rank_grads[r].begin() + lo, per_rank_grads[r].begin() + lo + len);
      }
      std::vector<float> sum = exchange_raw(slices, shard.owner, world, "grad/" + seg_tag, len);
      std::copy(sum.begin(), sum.end(), decoded.begin() + lo);
      result.stats.baseline_segments += 1;
      continue;
    }

    // Algorithm-1 path for this segment.
    const SketchGeometry geom =
        sketch_geometry(static_cast<std::uint32_t>(len), config.ratio, config.sketch_rows);

    std::vector<std::vector<float>> sparse(w);
    std::vector<std::vector<std::uint32_t>> index_words(w);
    world.for_each_rank([&](std::uint32_t r) {
      std::span<const float> g(per_rank_grads[r].data() + lo, len);
      std::span<float> acc(accumulators[r].values.data() + lo, len);
      std::vector<float> combined(g.begin(), g.end());
      kernels::add_inplace(combined, acc);
      SparsifyResult sp = sparsify(combined, config.theta);
      std::copy(sp.residual.begin(), sp.residual.end(), acc.begin());
      sparse[r] = std::move(sp.sparse);
      index_words[r] = Index::create(sparse[r], config.index_width).words;
    });

    Index merged = Index::zeros(static_cast<std::uint32_t>(len), config.index_width);
    merged.words = world.all_reduce_sum(
        index_words,
        Traffic{"index/" + seg_tag, len, static_cast<std::uint64_t>(len) * config.index_width});
    const std::vector<std::uint32_t> presence = merged.presence();

    std::vector<std::vector<float>> sketches(w);
    world.for_each_rank([&](std::uint32_t r) {
      sketches[r] = CountSketch::compress(sparse[r], geom, config.seed).values;
    });
    CountSketch summed = CountSketch::zeros(geom, config.seed);
    summed.values =
        world.reduce(sketches, shard.owner, Traffic{"sketch/" + seg_tag, len, std::nullopt});

    DecodeResult dec = peeling_decompress(presence, summed);
    std::copy(dec.values.begin(), dec.values.end(), decoded.begin() + lo);

    PeelStats st;
    st.presence = presence.size();
    st.unresolved = dec.unresolved.size();
    st.peeled = presence.size() - dec.unresolved.size();
    st.compressed_segments = 1;
    // Index corruption vs the true union of rank supports.
    std::vector<bool> truth(len, false);
    for (std::uint32_t r = 0; r < w; ++r) {
      for (std::uint64_t i = 0; i < len; ++i) {
        if (sparse[r][i] != 0.0f) truth[i] = true;
      }
    }
    std::vector<bool> present(len, false);
    for (std::uint32_t p : presence) present[p] = true;
    for (std::uint64_t i = 0; i < len; ++i) {
      if (truth[i] && !present[i]) st.index_lost += 1;
      if (present[i] && !truth[i]) st.index_spurious += 1;
    }
    result.stats += st;

    if (collect_audit) {
      std::vector<float> sum(len);
      kernels::rank_sum(sum, sparse, kernels::Exec::serial);
      std::copy(sum.begin(), sum.end(), result.audit_exchanged_sum->begin() + lo);
    }
  }

  result.decoded = std::move(decoded);
  return result;
}

CommVolume comm_volume_model(const CompressionConfig& config, std::uint32_t world_size,
                             std::optional<std::uint64_t> n) {
  config.validate_for_world(world_size);
  CommVolume v;
  if (config.ratio == 1) {
    v.index_bits = 0.0;
    v.sketch_bits = 32.0;
    v.total_bits = 32.0;
    v.factor = 1.0;
    return v;
  }
  v.index_bits = 2.0 * config.index_width;  // All-Reduce is charged twice
  if (n) {
    const SketchGeometry geom =
        sketch_geometry(static_cast<std::uint32_t>(*n), config.ratio, config.sketch_rows);
    const std::uint64_t payload =
        static_cast<std::uint64_t>(geom.rows) * geom.buckets_per_row * 32ull;
    v.sketch_bits = static_cast<double>(payload) / static_cast<double>(*n);
  } else {
    v.sketch_bits = 32.0 / config.ratio;
  }
  v.total_bits = v.index_bits + v.sketch_bits;
  v.factor = 32.0 / v.total_bits;
  return v;
}

CommVolume lhc_comm_volume_model(const CompressionConfig& config, std::uint32_t world_size,
                                 std::optional<std::uint64_t> n) {
  CommVolume v = comm_volume_model(config, world_size, n);
  if (config.ratio == 1) return v;
  v.sketch_bits *= 2.0;  // sketch goes over All-Reduce as well
  v.total_bits = v.index_bits + v.sketch_bits;
  v.factor = 32.0 / v.total_bits;
  return v;
}

}  // namespace tagc
