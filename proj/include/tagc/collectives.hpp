#pragma once
// In-process simulation of a W-rank communication group with exact traffic
// accounting.
//
// Collectives take all per-rank payloads at once and always fold in ascending
// rank order, so float results are bit-identical no matter how the rank-local
// work around them was scheduled. The execution mode only controls how
// for_each_rank() drives rank-local code: sequentially, or with one worker
// thread per rank joined at the call boundary (the collective call itself is
// the barrier).
//
// Cost model: every collective is charged cost_factor * payload_bits per
// rank, with All-Reduce at 2x and Reduce / Reduce-Scatter / All-Gather at 1x.
// This is a declared model, not a measurement; it is what the communication
// volume reports are built on. Payload bits are logical sizes (an index over
// n positions at width w counts n*w bits even though the packed words pad up
// to a multiple of 32).

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace tagc {

enum class CollectiveOp { all_reduce, reduce, reduce_scatter, all_gather };

const char* to_string(CollectiveOp op);
std::uint32_t cost_factor(CollectiveOp op);

enum class WorldMode { sequential, parallel };

WorldMode world_mode_from_string(const std::string& s);
const char* to_string(WorldMode mode);

// Per-call accounting info. `params` is the parameter count the traffic is
// normalized against; `payload_bits` overrides the logical per-rank payload
// size when the in-memory representation pads (packed indices).
struct Traffic {
  std::string tag;
  std::uint64_t params = 0;
  std::optional<std::uint64_t> payload_bits;
};

struct LedgerRow {
  CollectiveOp op;
  std::string tag;
  std::uint64_t calls = 0;
  std::uint64_t payload_bits = 0;
  std::uint64_t charged_bits = 0;
  std::uint64_t params = 0;

  double bits_per_param_per_rank() const {
    return params == 0 ? 0.0 : static_cast<double>(charged_bits) / static_cast<double>(params);
  }

  bool operator==(const LedgerRow&) const = default;
};

class TrafficLedger {
 public:
  void record(CollectiveOp op, const std::string& tag, std::uint64_t payload_bits,
              std::uint64_t params);

  std::vector<LedgerRow> rows() const;  // ordered by (op, tag)
  const LedgerRow* find(CollectiveOp op, const std::string& tag) const;

  // Aggregate charged bits / params over rows whose tag starts with `prefix`.
  double bits_per_param_per_rank(const std::string& prefix = "") const;

  void to_csv(std::ostream& os) const;
  nlohmann::ordered_json to_json() const;

  bool operator==(const TrafficLedger&) const = default;

 private:
  std::map<std::pair<int, std::string>, LedgerRow> rows_;
};

class World {
 public:
  World(std::uint32_t size, WorldMode mode);

  std::uint32_t size() const { return size_; }
  WorldMode mode() const { return mode_; }
  TrafficLedger& ledger() { return ledger_; }
  const TrafficLedger& ledger() const { return ledger_; }

  // Runs fn(rank) for every rank: in order in sequential mode, on one worker
  // thread per rank in parallel mode. Returns once all ranks finished.
  void for_each_rank(const std::function<void(std::uint32_t)>& fn);

  // Word-wise (wrapping) or element-wise sum in ascending rank order,
  // delivered to every rank. Charged 2x payload.
  std::vector<float> all_reduce_sum(std::span<const std::vector<float>> payloads,
                                    const Traffic& traffic);
  std::vector<std::uint32_t> all_reduce_sum(std::span<const std::vector<std::uint32_t>> payloads,
                                            const Traffic& traffic);

  // Rank-ordered sum delivered only to root. Charged 1x payload.
  std::vector<float> reduce(std::span<const std::vector<float>> payloads, std::uint32_t root,
                            const Traffic& traffic);

  // Even split: payload length must be divisible by the world size; slice i
  // of the rank-ordered sum goes to rank i. Charged 1x payload.
  std::vector<std::vector<float>> reduce_scatter(std::span<const std::vector<float>> payloads,
                                                 const Traffic& traffic);

  // General split with per-rank receive counts (counts may be zero, summing
  // to the payload length), the shard-aligned layout sharded training uses.
  std::vector<std::vector<float>> reduce_scatter(std::span<const std::vector<float>> payloads,
                                                 std::span<const std::size_t> counts,
                                                 const Traffic& traffic);

  // Concatenation of per-rank slices, delivered to every rank. Charged 1x.
  std::vector<float> all_gather(std::span<const std::vector<float>> slices,
                                const Traffic& traffic);

 private:
  template <typename T>
  std::vector<T> fold_ascending(std::span<const std::vector<T>> payloads);
  void check_world_payloads(std::size_t count) const;

  std::uint32_t size_;
  WorldMode mode_;
  TrafficLedger ledger_;
};

}  // namespace tagc
