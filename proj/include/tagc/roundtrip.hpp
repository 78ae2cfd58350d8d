#pragma once
// Seeded Monte-Carlo round-trip trials: construct per-rank sparse vectors
// whose merged support hits a target sparsity, push them through the
// compressed exchange, and compare the decode against the rank-ordered
// reference sum.

#include <cstdint>

#include <json.hpp>

#include "tagc/collectives.hpp"
#include "tagc/config.hpp"

namespace tagc {

struct RoundtripParams {
  std::uint32_t n = 10000;
  std::uint32_t trials = 500;
  double theta = 80.0;         // merged-support sparsity target, percent zeros
  std::uint32_t ratio = 2;
  std::uint32_t index_width = 4;
  std::uint32_t world_size = 2;
  std::uint32_t sketch_rows = 3;
  std::uint64_t seed = 1;
  WorldMode mode = WorldMode::sequential;
  bool allow_low_theta = false;
};

struct RoundtripReport {
  std::uint32_t trials = 0;
  double mean_peeled_fraction = 0.0;
  double min_peeled_fraction = 1.0;
  std::uint32_t trials_fully_peeled = 0;
  std::uint64_t presence_total = 0;
  std::uint64_t unresolved_total = 0;
  std::uint32_t integer_trials = 0;
  std::uint32_t float_trials = 0;
  bool integer_exact_when_resolved = true;   // bit-exact decode on resolved integer trials
  double max_rel_error_resolved = 0.0;       // float trials with nothing unresolved
  double max_rel_error_any = 0.0;            // includes estimation-filled positions
  std::uint64_t index_lost = 0;
  std::uint64_t index_spurious = 0;
  bool pass = false;

  nlohmann::ordered_json to_json(const RoundtripParams& params) const;
};

// Alternates small-integer and float-valued trials. Pass criteria: mean
// peeled fraction >= 0.99, resolved integer decodes bit-exact, resolved float
// decodes within 1e-5 relative.
RoundtripReport roundtrip_experiment(const RoundtripParams& params);

}  // namespace tagc
