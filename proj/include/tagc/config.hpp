#pragma once
// Compression configuration and the key=value config file format.

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace tagc {

enum class Policy { all_layers, non_attention_linear, none };

Policy policy_from_string(const std::string& s);
const char* to_string(Policy p);

struct CompressionConfig {
  double theta = 0.0;              // sparsification threshold, percent
  std::uint32_t ratio = 1;         // 1 = codec bypass, else one of {2, 4, 10}
  std::uint32_t index_width = 4;   // 1 or 4
  Policy policy = Policy::non_attention_linear;
  bool include_out_proj = true;    // attention out-projection counts as compressible
  std::uint64_t seed = 0;
  std::uint32_t sketch_rows = 3;
  bool allow_low_theta = false;    // permit theta below the ratio's floor (estimation-heavy)
  std::uint64_t min_compress_segment = 1024;  // smaller segments always go uncompressed

  // Sparsity floor each ratio needs for lossless peeling; the pairing is
  // rejected below it unless allow_low_theta is set.
  static double theta_floor(std::uint32_t ratio);

  void validate() const;
  // Additional checks that depend on the world: a 4-bit index is only exact
  // up to 15 contributors, wider worlds are rejected.
  void validate_for_world(std::uint32_t world_size) const;
};

// Minimal key = value file: one pair per line, '#' comments, blank lines
// ignored. Parse errors carry the 1-based line number.
class KvFile {
 public:
  static KvFile parse_file(const std::string& path);
  static KvFile parse_string(const std::string& text, const std::string& name = "<string>");

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, std::optional<double> fallback = std::nullopt) const;
  std::int64_t get_int(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) const;
  std::uint64_t get_uint(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) const;
  bool get_bool(const std::string& key, std::optional<bool> fallback = std::nullopt) const;

  // Rejects keys outside the given set, naming the first offender.
  void require_known(std::initializer_list<const char*> allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::string name_;
  std::map<std::string, std::string> values_;
};

}  // namespace tagc
