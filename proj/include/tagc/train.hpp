#pragma once
// Desk-scale sharded training harness: W simulated ranks with model replicas,
// per-shard gradient exchange over the baseline or compressed path, owner-side
// optimizer step, parameter re-broadcast via All-Gather.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tagc/collectives.hpp"
#include "tagc/config.hpp"
#include "tagc/hash.hpp"
#include "tagc/hook.hpp"
#include "tagc/model.hpp"

namespace tagc {

enum class GradPath { baseline, tagc };
GradPath grad_path_from_string(const std::string& s);
const char* to_string(GradPath p);

enum class OptimizerKind { sgd, adamw_nm };  // adamw_nm: momentum-free AdamW-style
OptimizerKind optimizer_from_string(const std::string& s);
const char* to_string(OptimizerKind o);

struct TrainConfig {
  TinyModelConfig model;
  std::uint64_t seed = 1;
  std::uint32_t steps = 200;
  std::uint32_t batch = 4;  // total sequences per step, split across ranks
  double lr = 0.5;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double weight_decay = 0.0;
  std::uint32_t eval_every = 100;
  std::uint32_t eval_batches = 4;
  GradPath path = GradPath::baseline;
  CompressionConfig compression;  // used on the tagc path
  std::uint32_t world_size = 2;
  WorldMode mode = WorldMode::sequential;
  std::string corpus_path = "data/corpus.txt";
  bool audit_conservation = false;

  void validate() const;
  static TrainConfig from_kv(const KvFile& kv);
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LossPoint {
  std::uint32_t step = 0;
  float train_loss = 0.0f;
  std::optional<float> val_loss;
};

struct RunResult {
  std::vector<LossPoint> curve;
  float final_val_loss = 0.0f;
  bool diverged = false;
  std::uint32_t diverged_step = 0;
  PeelStats peel;
  TrafficLedger ledger;
  double audit_max_error = 0.0;  // only meaningful with audit_conservation
  std::uint64_t corpus_hash = 0;
  std::uint64_t param_count = 0;
};

RunResult run_experiment(const TrainConfig& config);

void write_loss_csv(const RunResult& result, std::ostream& os);
nlohmann::ordered_json run_manifest(const TrainConfig& config, const RunResult& result);

// Reproducible gradient-like vectors: log-normal magnitudes with fair random
// signs.
struct SyntheticStreamSpec {
  std::size_t n = 0;
  double mu = 0.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

class SyntheticStream {
 public:
  explicit SyntheticStream(const SyntheticStreamSpec& spec);
  std::vector<float> next();

 private:
  SyntheticStreamSpec spec_;
  Rng rng_;
};

}  // namespace tagc
