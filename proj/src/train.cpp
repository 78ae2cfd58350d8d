#include "tagc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tagc/hash.hpp"
#include "tagc/kernels.hpp"

namespace tagc {

GradPath grad_path_from_string(const std::string& s) {
  if (s == "baseline") return GradPath::baseline;
  if (s == "tagc") return GradPath::tagc;
  throw std::invalid_argument("unknown gradient path: " + s);
}

const char* to_string(GradPath p) { return p == GradPath::baseline ? "baseline" : "tagc"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adamw_nm") return OptimizerKind::adamw_nm;
  throw std::invalid_argument("unknown optimizer: " + s);
}

const char* to_string(OptimizerKind o) {
  return o == OptimizerKind::sgd ? "sgd" : "adamw_nm";
}

void TrainConfig::validate() const {
  model.validate();
  if (steps == 0) throw std::invalid_argument("steps must be at least 1");
  if (batch == 0) throw std::invalid_argument("batch must be at least 1");
  if (world_size == 0) throw std::invalid_argument("world size must be at least 1");
  if (batch % world_size != 0)
    throw std::invalid_argument("batch must divide evenly across ranks");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (eval_every == 0) throw std::invalid_argument("eval_every must be at least 1");
  if (eval_batches == 0) throw std::invalid_argument("eval_batches must be at least 1");
  if (path == GradPath::tagc) compression.validate_for_world(world_size);
}

TrainConfig TrainConfig::from_kv(const KvFile& kv) {
  kv.require_known({"seed", "steps", "batch", "lr", "optimizer", "weight_decay", "eval_every",
                    "eval_batches", "path", "world_size", "mode", "corpus", "audit", "theta",
                    "ratio", "index_width", "policy", "include_out_proj", "compression_seed",
                    "sketch_rows", "allow_low_theta", "min_compress_segment", "model.layers",
                    "model.d_model", "model.heads", "model.ffn_mult", "model.vocab",
                    "model.ctx", "model.untied_head"});
  TrainConfig c;
  c.model = TinyModelConfig::from_kv(kv);
  c.seed = kv.get_uint("seed", c.seed);
  c.steps = static_cast<std::uint32_t>(kv.get_uint("steps", c.steps));
  c.batch = static_cast<std::uint32_t>(kv.get_uint("batch", c.batch));
  c.lr = kv.get_double("lr", c.lr);
  c.optimizer = optimizer_from_string(kv.get_string("optimizer", to_string(c.optimizer)));
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.eval_every = static_cast<std::uint32_t>(kv.get_uint("eval_every", c.eval_every));
  c.eval_batches = static_cast<std::uint32_t>(kv.get_uint("eval_batches", c.eval_batches));
  c.path = grad_path_from_string(kv.get_string("path", to_string(c.path)));
  c.world_size = static_cast<std::uint32_t>(kv.get_uint("world_size", c.world_size));
  c.mode = world_mode_from_string(kv.get_string("mode", to_string(c.mode)));
  c.corpus_path = kv.get_string("corpus", c.corpus_path);
  c.audit_conservation = kv.get_bool("audit", c.audit_conservation);
  c.compression.theta = kv.get_double("theta", c.compression.theta);
  c.compression.ratio = static_cast<std::uint32_t>(kv.get_uint("ratio", c.compression.ratio));
  c.compression.index_width =
      static_cast<std::uint32_t>(kv.get_uint("index_width", c.compression.index_width));
  c.compression.policy =
      policy_from_string(kv.get_string("policy", to_string(c.compression.policy)));
  c.compression.include_out_proj =
      kv.get_bool("include_out_proj", c.compression.include_out_proj);
  c.compression.seed = kv.get_uint("compression_seed", c.compression.seed);
  c.compression.sketch_rows =
      static_cast<std::uint32_t>(kv.get_uint("sketch_rows", c.compression.sketch_rows));
  c.compression.allow_low_theta = kv.get_bool("allow_low_theta", c.compression.allow_low_theta);
  c.compression.min_compress_segment =
      kv.get_uint("min_compress_segment", c.compression.min_compress_segment);
  c.validate();
  return c;
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["steps"] = steps;
  j["batch"] = batch;
  j["lr"] = lr;
  j["optimizer"] = to_string(optimizer);
  j["weight_decay"] = weight_decay;
  j["eval_every"] = eval_every;
  j["eval_batches"] = eval_batches;
  j["path"] = to_string(path);
  j["world_size"] = world_size;
  j["mode"] = to_string(mode);
  j["corpus"] = corpus_path;
  j["audit"] = audit_conservation;
  j["model"] = {{"layers", model.layers},   {"d_model", model.d_model},
                {"heads", model.heads},     {"ffn_mult", model.ffn_mult},
                {"vocab", model.vocab},     {"ctx", model.ctx},
                {"untied_head", model.untied_head}};
  j["compression"] = {{"theta", compression.theta},
                      {"ratio", compression.ratio},
                      {"index_width", compression.index_width},
                      {"policy", to_string(compression.policy)},
                      {"include_out_proj", compression.include_out_proj},
                      {"seed", compression.seed},
                      {"sketch_rows", compression.sketch_rows},
                      {"allow_low_theta", compression.allow_low_theta},
                      {"min_compress_segment", compression.min_compress_segment}};
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& root) {
  const nlohmann::json& j = root.contains("config") ? root.at("config") : root;
  TrainConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.steps = j.at("steps").get<std::uint32_t>();
  c.batch = j.at("batch").get<std::uint32_t>();
  c.lr = j.at("lr").get<double>();
  c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  c.weight_decay = j.at("weight_decay").get<double>();
  c.eval_every = j.at("eval_every").get<std::uint32_t>();
  c.eval_batches = j.at("eval_batches").get<std::uint32_t>();
  c.path = grad_path_from_string(j.at("path").get<std::string>());
  c.world_size = j.at("world_size").get<std::uint32_t>();
  c.mode = world_mode_from_string(j.at("mode").get<std::string>());
  c.corpus_path = j.at("corpus").get<std::string>();
  c.audit_conservation = j.at("audit").get<bool>();
  const nlohmann::json& m = j.at("model");
  c.model.layers = m.at("layers").get<std::uint32_t>();
  c.model.d_model = m.at("d_model").get<std::uint32_t>();
  c.model.heads = m.at("heads").get<std::uint32_t>();
  c.model.ffn_mult = m.at("ffn_mult").get<std::uint32_t>();
  c.model.vocab = m.at("vocab").get<std::uint32_t>();
  c.model.ctx = m.at("ctx").get<std::uint32_t>();
  c.model.untied_head = m.at("untied_head").get<bool>();
  const nlohmann::json& k = j.at("compression");
  c.compression.theta = k.at("theta").get<double>();
  c.compression.ratio = k.at("ratio").get<std::uint32_t>();
  c.compression.index_width = k.at("index_width").get<std::uint32_t>();
  c.compression.policy = policy_from_string(k.at("policy").get<std::string>());
  c.compression.include_out_proj = k.at("include_out_proj").get<bool>();
  c.compression.seed = k.at("seed").get<std::uint64_t>();
  c.compression.sketch_rows = k.at("sketch_rows").get<std::uint32_t>();
  c.compression.allow_low_theta = k.at("allow_low_theta").get<bool>();
  c.compression.min_compress_segment = k.at("min_compress_segment").get<std::uint64_t>();
  c.validate();
  return c;
}

namespace {

struct Corpus {
  std::vector<std::int32_t> tokens;
  std::size_t train_len = 0;  // prefix used for training; the tail is held out
  std::uint64_t hash = 0;
};

Corpus load_corpus(const std::string& path, std::uint32_t vocab) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open corpus: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  const std::string text = os.str();
  if (text.size() < 1024) throw std::invalid_argument("corpus too small: " + path);
  Corpus c;
  c.hash = fnv1a64(text);
  c.tokens.reserve(text.size());
  for (unsigned char ch : text) {
    if (ch >= vocab)
      throw std::invalid_argument("corpus byte exceeds the model vocabulary");
    c.tokens.push_back(static_cast<std::int32_t>(ch));
  }
  c.train_len = text.size() * 9 / 10;
  return c;
}

Batch make_batch(const Corpus& corpus, std::span<const std::size_t> starts, std::size_t ctx) {
  Batch b;
  b.batch = starts.size();
  b.ctx = ctx;
  b.tokens.reserve(b.batch * ctx);
  b.targets.reserve(b.batch * ctx);
  for (std::size_t s : starts) {
    for (std::size_t i = 0; i < ctx; ++i) {
      b.tokens.push_back(corpus.tokens[s + i]);
      b.targets.push_back(corpus.tokens[s + i + 1]);
    }
  }
  return b;
}

struct OwnerState {
  std::vector<float> adam_v;  // second-moment state, adamw_nm only
};

void apply_optimizer(const TrainConfig& cfg, std::span<float> params,
                     std::span<const float> grad_mean, OwnerState& state, std::uint32_t step) {
  const float lr = static_cast<float>(cfg.lr);
  if (cfg.optimizer == OptimizerKind::sgd) {
    kernels::scale_sub_inplace(params, grad_mean, lr);
    return;
  }
  constexpr float kBeta2 = 0.999f;
  constexpr float kEps = 1e-8f;
  const float wd = static_cast<float>(cfg.weight_decay);
  if (state.adam_v.empty()) state.adam_v.assign(params.size(), 0.0f);
  const float bias_fix = 1.0f - std::pow(kBeta2, static_cast<float>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float g = grad_mean[i];
    state.adam_v[i] = kBeta2 * state.adam_v[i] + (1.0f - kBeta2) * g * g;
    const float vhat = state.adam_v[i] / bias_fix;
    params[i] -= lr * (g / (std::sqrt(vhat) + kEps) + wd * params[i]);
  }
}

}  // namespace

RunResult run_experiment(const TrainConfig& cfg) {
  cfg.validate();
  const std::uint32_t w = cfg.world_size;
  const Corpus corpus = load_corpus(cfg.corpus_path, cfg.model.vocab);
  if (corpus.train_len + cfg.model.ctx + 1 >= corpus.tokens.size())
    throw std::invalid_argument("corpus too small for the context length");

  World world(w, cfg.mode);
  RunResult result;
  result.corpus_hash = corpus.hash;

  // Identical replicas per rank.
  std::vector<Model> replicas;
  replicas.reserve(w);
  for (std::uint32_t r = 0; r < w; ++r) replicas.push_back(build_model(cfg.model, cfg.seed));
  result.param_count = replicas[0].param_count();

  const std::uint64_t total = result.param_count;
  const std::uint64_t padded = ((total + w - 1) / w) * w;
  std::vector<ShardSpec> shards = make_shards(replicas[0].specs, w, w);

  std::vector<float> flat_params(padded, 0.0f);
  replicas[0].copy_flat_params(std::span<float>(flat_params.data(), total));

  // Per (shard, rank) residual accumulators; per-shard owner optimizer state.
  std::vector<std::vector<ResidualAccumulator>> accumulators;
  std::vector<OwnerState> owner_state(shards.size());
  for (const ShardSpec& sh : shards)
    accumulators.emplace_back(w, ResidualAccumulator(sh.size()));

  // Fixed held-out evaluation batches.
  const std::size_t ctx = cfg.model.ctx;
  std::vector<Batch> eval_set;
  {
    Rng rng(splitmix64(cfg.seed ^ 0x76E15D3EFEFDCBBFULL));
    const std::size_t lo = corpus.train_len;
    const std::size_t hi = corpus.tokens.size() - ctx - 1;
    for (std::uint32_t e = 0; e < cfg.eval_batches; ++e) {
      std::vector<std::size_t> starts(cfg.batch);
      for (auto& s : starts) s = lo + rng.next_below(hi - lo);
      eval_set.push_back(make_batch(corpus, starts, ctx));
    }
  }
  auto eval_loss = [&]() {
    float sum = 0.0f;
    for (const Batch& b : eval_set) sum += loss_only(replicas[0], b);
    return sum / static_cast<float>(eval_set.size());
  };

  const std::uint32_t per_rank = cfg.batch / w;
  std::vector<std::vector<float>> flat_grads(w, std::vector<float>(padded, 0.0f));
  std::vector<float> rank_loss(w, 0.0f);

  // Audit scratch, tagc path only.
  const bool audit = cfg.audit_conservation && cfg.path == GradPath::tagc;

  for (std::uint32_t step = 1; step <= cfg.steps; ++step) {
    // Same start draw regardless of world size: rank r owns slice r of the
    // step's start list.
    Rng rng(splitmix64(cfg.seed + 0x51ED2701A2F4E1B5ULL * step));
    std::vector<std::size_t> starts(cfg.batch);
    for (auto& s : starts) s = rng.next_below(corpus.train_len - ctx - 1);

    world.for_each_rank([&](std::uint32_t r) {
      std::vector<std::size_t> mine(starts.begin() + r * per_rank,
                                    starts.begin() + (r + 1) * per_rank);
      const Batch b = make_batch(corpus, mine, ctx);
      rank_loss[r] = loss_and_gradients(replicas[r], b);
      std::fill(flat_grads[r].begin() + total, flat_grads[r].end(), 0.0f);
      replicas[r].copy_flat_grads(std::span<float>(flat_grads[r].data(), total));
    });

    float train_loss = 0.0f;
    for (std::uint32_t r = 0; r < w; ++r) train_loss += rank_loss[r];
    train_loss /= static_cast<float>(w);
    if (!std::isfinite(train_loss)) {
      result.diverged = true;
      result.diverged_step = step;
      break;
    }

    // Per-shard exchange and owner update.
    std::vector<std::vector<float>> owner_slices(w);
    for (std::size_t si = 0; si < shards.size(); ++si) {
      const ShardSpec& sh = shards[si];
      std::vector<std::vector<float>> slices(w);
      for (std::uint32_t r = 0; r < w; ++r)
        slices[r].assign(flat_grads[r].begin() + sh.begin, flat_grads[r].begin() + sh.end);

      std::vector<float> decoded;
      if (cfg.path == GradPath::baseline) {
        decoded = baseline_reduce_shard(sh, slices, world);
      } else {
        std::vector<float> acc_prev_sum, raw_sum;
        if (audit) {
          acc_prev_sum.resize(sh.size());
          raw_sum.resize(sh.size());
          std::vector<std::vector<float>> accs;
          for (std::uint32_t r = 0; r < w; ++r) accs.push_back(accumulators[si][r].values);
          kernels::rank_sum(acc_prev_sum, accs, kernels::Exec::serial);
          kernels::rank_sum(raw_sum, slices, kernels::Exec::serial);
        }
        ShardReduceResult res =
            tagc_reduce_shard(sh, slices, accumulators[si], cfg.compression, world, audit);
        result.peel += res.stats;
        decoded = std::move(*res.decoded);
        if (audit) {
          std::vector<float> acc_next_sum(sh.size());
          std::vector<std::vector<float>> accs;
          for (std::uint32_t r = 0; r < w; ++r) accs.push_back(accumulators[si][r].values);
          kernels::rank_sum(acc_next_sum, accs, kernels::Exec::serial);
          for (const LayerSegment& seg : sh.segments) {
            const bool compressed =
                kind_compressible(seg.kind, cfg.compression.policy,
                                  cfg.compression.include_out_proj) &&
                cfg.compression.ratio > 1 &&
                seg.size() >= cfg.compression.min_compress_segment;
            if (!compressed) continue;
            for (std::uint64_t i = seg.begin - sh.begin; i < seg.end - sh.begin; ++i) {
              const double lhs = static_cast<double>((*res.audit_exchanged_sum)[i]) +
                                 static_cast<double>(acc_next_sum[i]);
              const double rhs = static_cast<double>(raw_sum[i]) +
                                 static_cast<double>(acc_prev_sum[i]);
              const double err = std::fabs(lhs - rhs) / std::max(1.0, std::fabs(rhs));
              result.audit_max_error = std::max(result.audit_max_error, err);
            }
          }
        }
      }

      // Mean over ranks, then the owner updates its parameter slice.
      const float inv_w = 1.0f / static_cast<float>(w);
      for (float& x : decoded) x *= inv_w;
      std::vector<float> param_slice(flat_params.begin() + sh.begin,
                                     flat_params.begin() + sh.end);
      apply_optimizer(cfg, param_slice, decoded, owner_state[si], step);
      owner_slices[sh.owner] = std::move(param_slice);
    }

    // Re-broadcast updated shards; every rank reloads the full flat space.
    flat_params = world.all_gather(owner_slices, Traffic{"params/allgather", padded, std::nullopt});
    world.for_each_rank([&](std::uint32_t r) {
      replicas[r].load_flat_params(std::span<const float>(flat_params.data(), total));
    });

    LossPoint point;
    point.step = step;
    point.train_loss = train_loss;
    if (step % cfg.eval_every == 0 || step == cfg.steps) point.val_loss = eval_loss();
    result.curve.push_back(point);
  }

  if (result.diverged) {
    result.final_val_loss = std::numeric_limits<float>::quiet_NaN();
  } else {
    result.final_val_loss = result.curve.empty() ? std::numeric_limits<float>::quiet_NaN()
                                                 : result.curve.back().val_loss.value();
  }
  result.ledger = world.ledger();
  return result;
}

void write_loss_csv(const RunResult& result, std::ostream& os) {
  os << "step,train_loss,val_loss\n";
  char buf[64];
  for (const LossPoint& p : result.curve) {
    std::snprintf(buf, sizeof(buf), "%u,%.9g,", p.step, static_cast<double>(p.train_loss));
    os << buf;
    if (p.val_loss) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(*p.val_loss));
      os << buf;
    }
    os << '\n';
  }
}

nlohmann::ordered_json run_manifest(const TrainConfig& cfg, const RunResult& result) {
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(result.corpus_hash));
  nlohmann::ordered_json j;
  j["config"] = cfg.to_json();
  j["corpus_hash"] = std::string(hash_buf);
  j["param_count"] = result.param_count;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const LayerSpec& spec : model_layer_specs(cfg.model)) {
    const bool flagged = cfg.path == GradPath::tagc &&
                         kind_compressible(spec.kind, cfg.compression.policy,
                                           cfg.compression.include_out_proj);
    const bool compressed = flagged && cfg.compression.ratio > 1 &&
                            spec.param_count >= cfg.compression.min_compress_segment;
    layers.push_back({{"name", spec.name},
                      {"kind", to_string(spec.kind)},
                      {"params", spec.param_count},
                      {"policy_flagged", flagged},
                      {"compressed", compressed}});
  }
  j["layers"] = std::move(layers);
  nlohmann::ordered_json r;
  r["diverged"] = result.diverged;
  if (result.diverged) r["diverged_step"] = result.diverged_step;
  r["steps_run"] = result.curve.size();
  r["final_train_loss"] = result.curve.empty() ? 0.0 : result.curve.back().train_loss;
  r["final_val_loss"] = std::isfinite(result.final_val_loss)
                            ? nlohmann::ordered_json(result.final_val_loss)
                            : nlohmann::ordered_json(nullptr);
  r["peel"] = {{"presence", result.peel.presence},
               {"peeled", result.peel.peeled},
               {"unresolved", result.peel.unresolved},
               {"peel_success", result.peel.peel_success()},
               {"index_lost", result.peel.index_lost},
               {"index_spurious", result.peel.index_spurious},
               {"index_collision_rate", result.peel.index_collision_rate()},
               {"compressed_segments", result.peel.compressed_segments},
               {"baseline_segments", result.peel.baseline_segments}};
  if (result.audit_max_error > 0.0) r["audit_max_error"] = result.audit_max_error;
  r["ledger"] = result.ledger.to_json();
  j["result"] = std::move(r);
  return j;
}

SyntheticStream::SyntheticStream(const SyntheticStreamSpec& spec)
    : spec_(spec), rng_(splitmix64(spec.seed ^ 0xD1B54A32D192ED03ULL)) {
  if (spec.n == 0) throw std::invalid_argument("synthetic stream needs n >= 1");
  if (spec.sigma < 0.0) throw std::invalid_argument("sigma must be non-negative");
}

std::vector<float> SyntheticStream::next() {
  std::vector<float> out(spec_.n);
  for (auto& x : out) {
    const double mag = std::exp(spec_.mu + spec_.sigma * rng_normal(rng_));
    const bool negative = (rng_.next_u64() & 1) != 0;
    x = static_cast<float>(negative ? -mag : mag);
  }
  return out;
}

}  // namespace tagc
