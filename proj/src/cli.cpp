#include "tagc/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "tagc/hook.hpp"
#include "tagc/model.hpp"
#include "tagc/roundtrip.hpp"
#include "tagc/sketch.hpp"
#include "tagc/sparsify.hpp"
#include "tagc/train.hpp"

namespace tagc {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitUsage = 2;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

// ---------------------------------------------------------------- roundtrip

int cmd_roundtrip(const RoundtripParams& params, const std::string& out_dir, std::ostream& out) {
  const RoundtripReport report = roundtrip_experiment(params);
  if (!out_dir.empty())
    write_file(fs::path(out_dir) / "roundtrip.json", report.to_json(params).dump(2) + "\n");
  out << "roundtrip: n=" << params.n << " trials=" << params.trials << " theta=" << params.theta
      << " ratio=" << params.ratio << " width=" << params.index_width
      << " world=" << params.world_size << "\n";
  out << "  mean_peeled_fraction = " << fmt(report.mean_peeled_fraction) << "\n";
  out << "  trials_fully_peeled  = " << report.trials_fully_peeled << "/" << report.trials
      << "\n";
  out << "  unresolved_total     = " << report.unresolved_total << "\n";
  out << "  max_rel_error        = " << fmt(report.max_rel_error_resolved) << " (resolved), "
      << fmt(report.max_rel_error_any) << " (any)\n";
  out << "  integer_exact        = " << (report.integer_exact_when_resolved ? "yes" : "no")
      << "\n";
  out << "  index lost/spurious  = " << report.index_lost << "/" << report.index_spurious
      << "\n";
  out << (report.pass ? "PASS" : "FAIL") << "\n";
  return report.pass ? kExitOk : kExitInvariant;
}

// ---------------------------------------------------------------- commreport

struct CommPoint {
  std::uint32_t width = 4;
  std::uint32_t ratio = 2;
};

struct CommRow {
  CommPoint point;
  CommVolume model;      // TAGC: All-Reduce index + Reduce sketch
  CommVolume lhc;        // both structures over All-Reduce
  double measured_index = 0.0;
  double measured_sketch = 0.0;
  double measured_lhc_sketch = 0.0;
  bool matches = false;
};

// Probe exchange over a single segment: measures ledger bits for the real
// compressed path, plus an all-All-Reduce sketch exchange for the LHC-style
// comparison column. n is chosen so the exact sketch geometry matches the
// asymptotic model (divisible by rows * ratio).
CommRow comm_probe(const CommPoint& point, std::uint32_t n, std::uint64_t seed) {
  CommRow row;
  row.point = point;

  CompressionConfig config;
  config.theta = CompressionConfig::theta_floor(point.ratio);
  config.ratio = point.ratio;
  config.index_width = point.width;
  config.policy = Policy::all_layers;
  config.seed = seed;
  config.min_compress_segment = 1;
  const std::uint32_t w = 2;
  config.validate_for_world(w);

  row.model = comm_volume_model(config, w, n);
  row.lhc = lhc_comm_volume_model(config, w, n);

  World world(w, WorldMode::sequential);
  SyntheticStream stream({n, 0.0, 1.0, seed});
  std::vector<std::vector<float>> grads;
  for (std::uint32_t r = 0; r < w; ++r) grads.push_back(stream.next());

  ShardSpec shard;
  shard.owner = 0;
  shard.begin = 0;
  shard.end = n;
  shard.segments = {{"probe", LayerKind::feed_forward, 0, n}};
  std::vector<ResidualAccumulator> accs(w, ResidualAccumulator(n));
  tagc_reduce_shard(shard, grads, accs, config, world);

  // LHC-style column: sketches synchronized with All-Reduce instead.
  const SketchGeometry geom = sketch_geometry(n, point.ratio, config.sketch_rows);
  std::vector<std::vector<float>> sketches;
  for (std::uint32_t r = 0; r < w; ++r) {
    SparsifyResult sp = sparsify(grads[r], config.theta);
    sketches.push_back(CountSketch::compress(sp.sparse, geom, seed).values);
  }
  world.all_reduce_sum(sketches, Traffic{"lhc_sketch/probe", n, std::nullopt});

  row.measured_index = world.ledger().bits_per_param_per_rank("index/");
  row.measured_sketch = world.ledger().bits_per_param_per_rank("sketch/");
  row.measured_lhc_sketch = world.ledger().bits_per_param_per_rank("lhc_sketch/");
  const double measured_total = row.measured_index + row.measured_sketch;
  row.matches = measured_total == row.model.total_bits &&
                row.measured_index + row.measured_lhc_sketch == row.lhc.total_bits;
  return row;
}

int cmd_commreport(const std::vector<CommPoint>& points, const std::string& out_dir,
                   std::ostream& out) {
  constexpr std::uint32_t kProbeN = 12000;  // divisible by rows*ratio for every ratio
  std::vector<CommRow> rows;
  rows.reserve(points.size());
  for (const CommPoint& p : points) rows.push_back(comm_probe(p, kProbeN, 42));

  std::ostringstream csv;
  csv << "width,ratio,index_bits,sketch_bits,total_bits,factor,lhc_total_bits,"
         "measured_index_bits,measured_sketch_bits,model_matches_ledger\n";
  nlohmann::ordered_json jrows = nlohmann::ordered_json::array();
  out << "width ratio  index  sketch   total  factor  lhc_total  measured  match\n";
  bool all_match = true;
  for (const CommRow& r : rows) {
    csv << r.point.width << ',' << r.point.ratio << ',' << fmt(r.model.index_bits) << ','
        << fmt(r.model.sketch_bits) << ',' << fmt(r.model.total_bits) << ','
        << fmt(r.model.factor) << ',' << fmt(r.lhc.total_bits) << ',' << fmt(r.measured_index)
        << ',' << fmt(r.measured_sketch) << ',' << (r.matches ? "true" : "false") << '\n';
    nlohmann::ordered_json j;
    j["width"] = r.point.width;
    j["ratio"] = r.point.ratio;
    j["index_bits"] = r.model.index_bits;
    j["sketch_bits"] = r.model.sketch_bits;
    j["total_bits"] = r.model.total_bits;
    j["factor"] = r.model.factor;
    j["lhc_total_bits"] = r.lhc.total_bits;
    j["measured_index_bits"] = r.measured_index;
    j["measured_sketch_bits"] = r.measured_sketch;
    j["measured_lhc_sketch_bits"] = r.measured_lhc_sketch;
    j["model_matches_ledger"] = r.matches;
    jrows.push_back(std::move(j));
    char line[160];
    std::snprintf(line, sizeof(line), "%5u %5u %6.4g %7.4g %7.4g %7.4g %10.4g %9.4g  %s\n",
                  r.point.width, r.point.ratio, r.model.index_bits, r.model.sketch_bits,
                  r.model.total_bits, r.model.factor, r.lhc.total_bits,
                  r.measured_index + r.measured_sketch, r.matches ? "yes" : "NO");
    out << line;
    all_match = all_match && r.matches;
  }
  if (!out_dir.empty()) {
    write_file(fs::path(out_dir) / "comm_report.csv", csv.str());
    write_file(fs::path(out_dir) / "comm_report.json", jrows.dump(2) + "\n");
  }
  if (!all_match) out << "FAIL: model and ledger disagree\n";
  return all_match ? kExitOk : kExitInvariant;
}

// ---------------------------------------------------------------- train

int cmd_train(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
  std::ifstream f(config_path);
  if (!f) throw CLI::ValidationError("--config", "cannot open " + config_path);
  std::ostringstream os;
  os << f.rdbuf();
  const std::string text = os.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  TrainConfig config;
  if (first != std::string::npos && text[first] == '{') {
    config = TrainConfig::from_json(nlohmann::json::parse(text));
  } else {
    config = TrainConfig::from_kv(KvFile::parse_string(text, config_path));
  }

  const RunResult result = run_experiment(config);

  std::ostringstream csv;
  write_loss_csv(result, csv);
  if (!out_dir.empty()) {
    write_file(fs::path(out_dir) / "loss.csv", csv.str());
    write_file(fs::path(out_dir) / "manifest.json", run_manifest(config, result).dump(2) + "\n");
  }
  out << "train: path=" << to_string(config.path) << " steps=" << config.steps
      << " world=" << config.world_size << " params=" << result.param_count << "\n";
  if (result.diverged) {
    out << "DIVERGED at step " << result.diverged_step << "\n";
    return kExitInvariant;
  }
  out << "  final_train_loss = " << fmt(result.curve.back().train_loss) << "\n";
  out << "  final_val_loss   = " << fmt(result.final_val_loss) << "\n";
  if (config.path == GradPath::tagc) {
    out << "  peel_success     = " << fmt(result.peel.peel_success()) << "\n";
    out << "  index_collisions = " << result.peel.index_lost + result.peel.index_spurious
        << "\n";
    out << "  grad bits/param  = " << fmt(result.ledger.bits_per_param_per_rank("index/") +
                                          result.ledger.bits_per_param_per_rank("sketch/"))
        << " (compressed segments)\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- classify

int cmd_classify(const TinyModelConfig& model, Policy policy, bool include_out_proj,
                 const std::string& out_dir, std::ostream& out) {
  const std::vector<LayerSpec> specs = model_layer_specs(model);
  const ClassifyResult res = classify_layers(specs, policy, include_out_proj);

  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> by_kind;  // total, flagged
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& entry = by_kind[to_string(specs[i].kind)];
    entry.first += specs[i].param_count;
    if (res.flags[i]) entry.second += specs[i].param_count;
  }

  nlohmann::ordered_json j;
  j["model"] = {{"layers", model.layers},   {"d_model", model.d_model},
                {"heads", model.heads},     {"ffn_mult", model.ffn_mult},
                {"vocab", model.vocab},     {"ctx", model.ctx},
                {"untied_head", model.untied_head}};
  j["policy"] = to_string(policy);
  j["include_out_proj"] = include_out_proj;
  j["total_params"] = res.total_params;
  j["flagged_params"] = res.flagged_params;
  j["flagged_share"] = res.flagged_share();
  nlohmann::ordered_json kinds;
  for (const auto& [kind, counts] : by_kind) {
    kinds[kind] = {{"params", counts.first}, {"flagged", counts.second}};
  }
  j["by_kind"] = std::move(kinds);
  if (!out_dir.empty()) write_file(fs::path(out_dir) / "classify.json", j.dump(2) + "\n");

  out << "classify: policy=" << to_string(policy)
      << " include_out_proj=" << (include_out_proj ? "true" : "false") << "\n";
  out << "  total params   = " << res.total_params << "\n";
  out << "  flagged params = " << res.flagged_params << "\n";
  out << "  flagged share  = " << fmt(res.flagged_share()) << "\n";
  for (const auto& [kind, counts] : by_kind) {
    out << "    " << kind << ": " << counts.first << (counts.second ? " (compressed)" : "")
        << "\n";
  }
  return kExitOk;
}

TinyModelConfig gpt2_small_config() {
  TinyModelConfig c;
  c.layers = 12;
  c.d_model = 768;
  c.heads = 12;
  c.ffn_mult = 4;
  c.vocab = 50257;
  c.ctx = 1024;
  c.untied_head = true;
  return c;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compressed gradient exchange benchmarks"};
  app.require_subcommand(1);

  // roundtrip
  RoundtripParams rt;
  std::string rt_mode = "sequential", rt_out;
  auto* roundtrip = app.add_subcommand("roundtrip", "Monte-Carlo compress/decompress trials");
  roundtrip->add_option("--n", rt.n, "vector length")->check(CLI::PositiveNumber);
  roundtrip->add_option("--trials", rt.trials)->check(CLI::PositiveNumber);
  roundtrip->add_option("--theta", rt.theta, "merged sparsity, percent zeros");
  roundtrip->add_option("--ratio", rt.ratio)->check(CLI::IsMember({2, 4, 10}));
  roundtrip->add_option("--width", rt.index_width)->check(CLI::IsMember({1, 4}));
  roundtrip->add_option("--world", rt.world_size)->check(CLI::Range(2u, 16u));
  roundtrip->add_option("--rows", rt.sketch_rows)->check(CLI::PositiveNumber);
  roundtrip->add_option("--seed", rt.seed);
  roundtrip->add_option("--mode", rt_mode)->check(CLI::IsMember({"sequential", "parallel"}));
  roundtrip->add_flag("--allow-low-theta", rt.allow_low_theta,
                      "permit theta below the ratio's lossless floor");
  roundtrip->add_option("--out", rt_out, "output directory");

  // commreport
  std::vector<std::string> point_specs;
  std::string cr_out;
  auto* commreport = app.add_subcommand("commreport", "communication volume per parameter");
  commreport->add_option("--point", point_specs, "config as WIDTHxRATIO, e.g. 1x10")
      ->expected(-1);
  commreport->add_option("--out", cr_out, "output directory");

  // train
  std::string train_config, train_out;
  auto* train = app.add_subcommand("train", "loss-trajectory experiment");
  train->add_option("--config", train_config, "key=value file or manifest JSON")->required();
  train->add_option("--out", train_out, "output directory");

  // classify
  std::string cl_config, cl_policy = "non_attention_linear", cl_out;
  bool exclude_out_proj = false, gpt2_preset = false;
  auto* classify = app.add_subcommand("classify", "layer policy parameter-share report");
  classify->add_option("--config", cl_config, "model config file (model.* keys)");
  classify->add_flag("--gpt2-small", gpt2_preset, "use the GPT-2 small shape");
  classify->add_option("--policy", cl_policy)
      ->check(CLI::IsMember({"all_layers", "non_attention_linear", "none"}));
  classify->add_flag("--exclude-out-proj", exclude_out_proj,
                     "leave the attention out-projection uncompressed");
  classify->add_option("--out", cl_out, "output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (roundtrip->parsed()) {
      rt.mode = world_mode_from_string(rt_mode);
      return cmd_roundtrip(rt, rt_out, out);
    }
    if (commreport->parsed()) {
      if (point_specs.empty()) {
        err << "error: commreport needs at least one --point\n";
        return kExitUsage;
      }
      std::vector<CommPoint> points;
      for (const std::string& s : point_specs) {
        const auto x = s.find('x');
        if (x == std::string::npos)
          throw std::invalid_argument("bad --point '" + s + "', expected WIDTHxRATIO");
        CommPoint p;
        p.width = static_cast<std::uint32_t>(std::stoul(s.substr(0, x)));
        p.ratio = static_cast<std::uint32_t>(std::stoul(s.substr(x + 1)));
        if (p.width != 1 && p.width != 4)
          throw std::invalid_argument("index width must be 1 or 4");
        points.push_back(p);
      }
      return cmd_commreport(points, cr_out, out);
    }
    if (train->parsed()) return cmd_train(train_config, train_out, out);
    if (classify->parsed()) {
      TinyModelConfig model;
      if (gpt2_preset) {
        model = gpt2_small_config();
      } else if (!cl_config.empty()) {
        model = TinyModelConfig::from_kv(KvFile::parse_file(cl_config));
      } else {
        err << "error: classify needs --config or --gpt2-small\n";
        return kExitUsage;
      }
      return cmd_classify(model, policy_from_string(cl_policy), !exclude_out_proj, cl_out, out);
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return kExitUsage;
}

}  // namespace tagc
