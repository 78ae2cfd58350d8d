#pragma once
// Per-shard gradient exchange: the compressed path (sparsify, index
// All-Reduce, sketch Reduce, peel at the owner) and the uncompressed
// baseline, plus the closed-form communication volume model the ledger is
// checked against.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tagc/collectives.hpp"
#include "tagc/config.hpp"
#include "tagc/layers.hpp"
#include "tagc/sparsify.hpp"

namespace tagc {

// A layer's intersection with one shard, in global flat-parameter coordinates.
struct LayerSegment {
  std::string name;
  LayerKind kind = LayerKind::other;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  std::uint64_t size() const { return end - begin; }
};

struct ShardSpec {
  std::uint32_t id = 0;
  std::uint32_t owner = 0;  // master rank receiving the reduced gradient
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  std::vector<LayerSegment> segments;

  std::uint64_t size() const { return end - begin; }
};

// Shards of equal size covering all layers plus any alignment padding; owner
// ranks are assigned round-robin by shard id.
std::vector<ShardSpec> make_shards(const std::vector<LayerSpec>& layers,
                                   std::uint32_t shard_count, std::uint32_t world_size);

struct PeelStats {
  std::uint64_t presence = 0;        // merged-index positions across segments
  std::uint64_t peeled = 0;          // recovered exactly
  std::uint64_t unresolved = 0;      // filled by estimation
  std::uint64_t index_lost = 0;      // true nonzeros missing from the merged index
  std::uint64_t index_spurious = 0;  // merged-index positions with no contributor
  std::uint64_t compressed_segments = 0;
  std::uint64_t baseline_segments = 0;

  PeelStats& operator+=(const PeelStats& o);
  double peel_success() const {
    return presence == 0 ? 1.0 : static_cast<double>(peeled) / static_cast<double>(presence);
  }
  double index_collision_rate() const;
};

struct ShardReduceResult {
  // Summed (decoded) shard gradient, present at the owner rank only.
  std::optional<std::vector<float>> decoded;
  PeelStats stats;
  // Rank-ordered sum of the exchanged (post-sparsify) vectors over compressed
  // segments, for conservation audits. Only filled when requested.
  std::optional<std::vector<float>> audit_exchanged_sum;
};

// One Algorithm-1 style exchange for a shard: per compressed segment,
// accumulate + sparsify locally, All-Reduce the packed index, compress
// against the local nonzeros, Reduce the sketches to the owner and peel
// there (estimation fills what peeling cannot). Segments the policy leaves
// uncompressed, and flagged segments below the size floor, exchange raw
// values instead. Accumulators are updated in place for every rank.
ShardReduceResult tagc_reduce_shard(const ShardSpec& shard,
                                    std::span<const std::vector<float>> per_rank_grads,
                                    std::span<ResidualAccumulator> accumulators,
                                    const CompressionConfig& config, World& world,
                                    bool collect_audit = false);

// Uncompressed reference path: the shard's slice of the global
// Reduce-Scatter, 32 bits per parameter per rank.
std::vector<float> baseline_reduce_shard(const ShardSpec& shard,
                                         std::span<const std::vector<float>> per_rank_grads,
                                         World& world);

struct CommVolume {
  double index_bits = 0.0;   // bits per parameter per rank
  double sketch_bits = 0.0;
  double total_bits = 0.0;
  double factor = 1.0;       // vs the 32-bit uncompressed baseline
};

// Predicted traffic for one compressed parameter. With `n` the exact sketch
// geometry for that vector length is used (matching what the ledger measures
// on a real exchange); without it the asymptotic 32/ratio payload.
CommVolume comm_volume_model(const CompressionConfig& config, std::uint32_t world_size,
                             std::optional<std::uint64_t> n = std::nullopt);

// Same, for the all-All-Reduce variant that synchronizes the sketch with
// All-Reduce as well (the LHC layout this scheme improves on).
CommVolume lhc_comm_volume_model(const CompressionConfig& config, std::uint32_t world_size,
                                 std::optional<std::uint64_t> n = std::nullopt);

}  // namespace tagc
