#include "tagc/roundtrip.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tagc/hash.hpp"
#include "tagc/hook.hpp"
#include "tagc/kernels.hpp"

namespace tagc {

namespace {

// s distinct positions out of n, by partial Fisher-Yates.
std::vector<std::uint32_t> sample_support(Rng& rng, std::uint32_t n, std::uint32_t s) {
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  for (std::uint32_t i = 0; i < s; ++i) {
    const std::uint32_t j = i + static_cast<std::uint32_t>(rng.next_below(n - i));
    std::swap(all[i], all[j]);
  }
  all.resize(s);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

RoundtripReport roundtrip_experiment(const RoundtripParams& params) {
  if (params.trials == 0) throw std::invalid_argument("roundtrip needs at least one trial");
  if (params.world_size < 2)
    throw std::invalid_argument("roundtrip needs a world of at least 2 ranks");
  if (params.world_size > 16)
    throw std::invalid_argument("roundtrip world size capped at 16");

  CompressionConfig config;
  config.theta = params.theta;
  config.ratio = params.ratio;
  config.index_width = params.index_width;
  config.policy = Policy::all_layers;
  config.sketch_rows = params.sketch_rows;
  config.allow_low_theta = params.allow_low_theta;
  config.min_compress_segment = 1;  // the whole point is to exercise the codec
  config.validate_for_world(params.world_size);

  const std::uint32_t n = params.n;
  const std::uint32_t w = params.world_size;
  const std::uint32_t zeros =
      static_cast<std::uint32_t>(std::ceil(params.theta * static_cast<double>(n) / 100.0));
  const std::uint32_t support = n - std::min(zeros, n);

  ShardSpec shard;
  shard.id = 0;
  shard.owner = 0;
  shard.begin = 0;
  shard.end = n;
  shard.segments = {{"block", LayerKind::feed_forward, 0, n}};

  RoundtripReport report;
  report.trials = params.trials;
  double peel_sum = 0.0;

  for (std::uint32_t t = 0; t < params.trials; ++t) {
    Rng rng(splitmix64(params.seed + 0x9E3779B97F4A7C15ULL * (t + 1)));
    const bool integer_trial = (t % 2 == 0);

    const std::vector<std::uint32_t> union_support = sample_support(rng, n, support);
    std::vector<std::vector<float>> grads(w, std::vector<float>(n, 0.0f));
    for (std::uint32_t p : union_support) {
      // Uniform non-empty rank subset, then one value draw per member.
      const std::uint64_t mask = rng.next_below((1ull << w) - 1) + 1;
      for (std::uint32_t r = 0; r < w; ++r) {
        if (!(mask >> r & 1)) continue;
        float v;
        if (integer_trial) {
          v = static_cast<float>(1 + static_cast<int>(rng.next_below(16)));
          if (rng.next_u64() & 1) v = -v;
        } else {
          do {
            v = static_cast<float>(rng.next_double() * 2.0 - 1.0);
          } while (v == 0.0f);
        }
        grads[r][p] = v;
      }
    }

    std::vector<float> reference(n);
    kernels::rank_sum(reference, grads, kernels::Exec::serial);

    World world(w, params.mode);
    std::vector<ResidualAccumulator> accs(w, ResidualAccumulator(n));
    CompressionConfig trial_config = config;
    trial_config.seed = rng.next_u64();
    ShardReduceResult res = tagc_reduce_shard(shard, grads, accs, trial_config, world);
    const std::vector<float>& decoded = *res.decoded;

    const double pf = res.stats.peel_success();
    peel_sum += pf;
    report.min_peeled_fraction = std::min(report.min_peeled_fraction, pf);
    report.presence_total += res.stats.presence;
    report.unresolved_total += res.stats.unresolved;
    report.index_lost += res.stats.index_lost;
    report.index_spurious += res.stats.index_spurious;
    const bool fully = res.stats.unresolved == 0;
    if (fully) report.trials_fully_peeled += 1;

    if (integer_trial) {
      report.integer_trials += 1;
      if (fully && res.stats.index_lost == 0 && res.stats.index_spurious == 0) {
        for (std::uint32_t p = 0; p < n; ++p) {
          if (decoded[p] != reference[p]) {
            report.integer_exact_when_resolved = false;
            break;
          }
        }
      }
    } else {
      report.float_trials += 1;
      // Elementwise relative error with the vector's own magnitude as the
      // cancellation floor: a position whose true sum nearly cancels cannot
      // be held to a pure relative bound by any float summation.
      double scale = 0.0;
      for (std::uint32_t p = 0; p < n; ++p)
        scale = std::max(scale, std::fabs(static_cast<double>(reference[p])));
      double max_rel = 0.0;
      for (std::uint32_t p = 0; p < n; ++p) {
        const double ref = reference[p];
        const double err = std::fabs(decoded[p] - ref);
        if (err == 0.0) continue;
        max_rel = std::max(max_rel, err / std::max(std::fabs(ref), scale));
      }
      report.max_rel_error_any = std::max(report.max_rel_error_any, max_rel);
      if (fully && res.stats.index_lost == 0 && res.stats.index_spurious == 0)
        report.max_rel_error_resolved = std::max(report.max_rel_error_resolved, max_rel);
    }
  }

  report.mean_peeled_fraction = peel_sum / params.trials;
  report.pass = report.mean_peeled_fraction >= 0.99 && report.integer_exact_when_resolved &&
                report.max_rel_error_resolved <= 1e-5;
  return report;
}

nlohmann::ordered_json RoundtripReport::to_json(const RoundtripParams& params) const {
  nlohmann::ordered_json j;
  j["config"] = {{"n", params.n},
                 {"trials", params.trials},
                 {"theta", params.theta},
                 {"ratio", params.ratio},
                 {"index_width", params.index_width},
                 {"world_size", params.world_size},
                 {"sketch_rows", params.sketch_rows},
                 {"seed", params.seed},
                 {"mode", to_string(params.mode)},
                 {"allow_low_theta", params.allow_low_theta}};
  j["mean_peeled_fraction"] = mean_peeled_fraction;
  j["min_peeled_fraction"] = min_peeled_fraction;
  j["trials_fully_peeled"] = trials_fully_peeled;
  j["presence_total"] = presence_total;
  j["unresolved_total"] = unresolved_total;
  j["integer_trials"] = integer_trials;
  j["float_trials"] = float_trials;
  j["integer_exact_when_resolved"] = integer_exact_when_resolved;
  j["max_rel_error_resolved"] = max_rel_error_resolved;
  j["max_rel_error_any"] = max_rel_error_any;
  j["index_lost"] = index_lost;
  j["index_spurious"] = index_spurious;
  j["pass"] = pass;
  return j;
}

}  // namespace tagc
