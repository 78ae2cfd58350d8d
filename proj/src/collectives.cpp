#include "tagc/collectives.hpp"

#include <cstdio>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "tagc/kernels.hpp"

namespace tagc {

const char* to_string(CollectiveOp op) {
  switch (op) {
    case CollectiveOp::all_reduce: return "all_reduce";
    case CollectiveOp::reduce: return "reduce";
    case CollectiveOp::reduce_scatter: return "reduce_scatter";
    case CollectiveOp::all_gather: return "all_gather";
  }
  return "?";
}

std::uint32_t cost_factor(CollectiveOp op) {
  return op == CollectiveOp::all_reduce ? 2u : 1u;
}

WorldMode world_mode_from_string(const std::string& s) {
  if (s == "sequential") return WorldMode::sequential;
  if (s == "parallel") return WorldMode::parallel;
  throw std::invalid_argument("unknown world mode: " + s);
}

const char* to_string(WorldMode mode) {
  return mode == WorldMode::sequential ? "sequential" : "parallel";
}

void TrafficLedger::record(CollectiveOp op, const std::string& tag, std::uint64_t payload_bits,
                           std::uint64_t params) {
  LedgerRow& row = rows_[{static_cast<int>(op), tag}];
  row.op = op;
  row.tag = tag;
  row.calls += 1;
  row.payload_bits += payload_bits;
  row.charged_bits += static_cast<std::uint64_t>(cost_factor(op)) * payload_bits;
  row.params += params;
}

std::vector<LedgerRow> TrafficLedger::rows() const {
  std::vector<LedgerRow> out;
  out.reserve(rows_.size());
  for (const auto& [key, row] : rows_) out.push_back(row);
  return out;
}

const LedgerRow* TrafficLedger::find(CollectiveOp op, const std::string& tag) const {
  auto it = rows_.find({static_cast<int>(op), tag});
  return it == rows_.end() ? nullptr : &it->second;
}

double TrafficLedger::bits_per_param_per_rank(const std::string& prefix) const {
  std::uint64_t charged = 0, params = 0;
  for (const auto& [key, row] : rows_) {
    if (row.tag.rfind(prefix, 0) != 0) continue;
    charged += row.charged_bits;
    params += row.params;
  }
  return params == 0 ? 0.0 : static_cast<double>(charged) / static_cast<double>(params);
}

void TrafficLedger::to_csv(std::ostream& os) const {
  os << "op,tag,calls,payload_bits,charged_bits,bits_per_param_per_rank\n";
  char buf[64];
  for (const auto& [key, row] : rows_) {
    std::snprintf(buf, sizeof(buf), "%.9g", row.bits_per_param_per_rank());
    os << to_string(row.op) << ',' << row.tag << ',' << row.calls << ',' << row.payload_bits
       << ',' << row.charged_bits << ',' << buf << '\n';
  }
}

nlohmann::ordered_json TrafficLedger::to_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& [key, row] : rows_) {
    nlohmann::ordered_json j;
    j["op"] = to_string(row.op);
    j["tag"] = row.tag;
    j["calls"] = row.calls;
    j["payload_bits"] = row.payload_bits;
    j["charged_bits"] = row.charged_bits;
    j["bits_per_param_per_rank"] = row.bits_per_param_per_rank();
    out.push_back(std::move(j));
  }
  return out;
}

World::World(std::uint32_t size, WorldMode mode) : size_(size), mode_(mode) {
  if (size == 0) throw std::invalid_argument("world size must be at least 1");
}

void World::for_each_rank(const std::function<void(std::uint32_t)>& fn) {
  if (mode_ == WorldMode::sequential || size_ == 1) {
    for (std::uint32_t r = 0; r < size_; ++r) fn(r);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(size_);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (std::uint32_t r = 0; r < size_; ++r) {
    workers.emplace_back([&, r] {
      try {
        fn(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

void World::check_world_payloads(std::size_t count) const {
  if (count != size_)
    throw std::invalid_argument("collective needs exactly one payload per rank");
}

template <typename T>
std::vector<T> World::fold_ascending(std::span<const std::vector<T>> payloads) {
  check_world_payloads(payloads.size());
  const std::size_t len = payloads[0].size();
  for (const auto& p : payloads) {
    if (p.size() != len) throw std::invalid_argument("collective payload lengths differ");
  }
  std::vector<T> out(len);
  if constexpr (std::is_same_v<T, float>) {
    kernels::rank_sum(out, payloads);
  } else {
    kernels::rank_sum_words(out, payloads);
  }
  return out;
}

std::vector<float> World::all_reduce_sum(std::span<const std::vector<float>> payloads,
                                         const Traffic& traffic) {
  std::vector<float> out = fold_ascending(payloads);
  ledger_.record(CollectiveOp::all_reduce, traffic.tag,
                 traffic.payload_bits.value_or(out.size() * 32ull), traffic.params);
  return out;
}

std::vector<std::uint32_t> World::all_reduce_sum(
    std::span<const std::vector<std::uint32_t>> payloads, const Traffic& traffic) {
  std::vector<std::uint32_t> out = fold_ascending(payloads);
  ledger_.record(CollectiveOp::all_reduce, traffic.tag,
                 traffic.payload_bits.value_or(out.size() * 32ull), traffic.params);
  return out;
}

std::vector<float> World::reduce(std::span<const std::vector<float>> payloads, std::uint32_t root,
                                 const Traffic& traffic) {
  if (root >= size_) throw std::invalid_argument("reduce root rank out of range");
  std::vector<float> out = fold_ascending(payloads);
  ledger_.record(CollectiveOp::reduce, traffic.tag,
                 traffic.payload_bits.value_or(out.size() * 32ull), traffic.params);
  return out;
}

std::vector<std::vector<float>> World::reduce_scatter(
    std::span<const std::vector<float>> payloads, const Traffic& traffic) {
  check_world_payloads(payloads.size());
  if (payloads[0].size() % size_ != 0)
    throw std::invalid_argument("reduce_scatter payload length not divisible by world size");
  std::vector<std::size_t> counts(size_, payloads[0].size() / size_);
  return reduce_scatter(payloads, counts, traffic);
}

std::vector<std::vector<float>> World::reduce_scatter(
    std::span<const std::vector<float>> payloads, std::span<const std::size_t> counts,
    const Traffic& traffic) {
  if (counts.size() != size_)
    throw std::invalid_argument("reduce_scatter needs one receive count per rank");
  std::vector<float> sum = fold_ascending(payloads);
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (total != sum.size())
    throw std::invalid_argument("reduce_scatter receive counts do not cover the payload");
  ledger_.record(CollectiveOp::reduce_scatter, traffic.tag,
                 traffic.payload_bits.value_or(sum.size() * 32ull), traffic.params);
  std::vector<std::vector<float>> out(size_);
  std::size_t offset = 0;
  for (std::uint32_t r = 0; r < size_; ++r) {
    out[r].assign(sum.begin() + offset, sum.begin() + offset + counts[r]);
    offset += counts[r];
  }
  return out;
}

std::vector<float> World::all_gather(std::span<const std::vector<float>> slices,
                                     const Traffic& traffic) {
  check_world_payloads(slices.size());
  for (const auto& s : slices) {
    if (s.size() != slices[0].size())
      throw std::invalid_argument("all_gather slices must have equal length");
  }
  std::vector<float> out;
  std::size_t total = 0;
  for (const auto& s : slices) total += s.size();
  out.reserve(total);
  for (const auto& s : slices) out.insert(out.end(), s.begin(), s.end());
  ledger_.record(CollectiveOp::all_gather, traffic.tag,
                 traffic.payload_bits.value_or(total * 32ull), traffic.params);
  return out;
}

}  // namespace tagc
