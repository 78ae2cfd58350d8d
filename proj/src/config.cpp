#include "tagc/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tagc/index.hpp"

namespace tagc {

Policy policy_from_string(const std::string& s) {
  if (s == "all_layers") return Policy::all_layers;
  if (s == "non_attention_linear") return Policy::non_attention_linear;
  if (s == "none") return Policy::none;
  throw std::invalid_argument("unknown policy: " + s);
}

const char* to_string(Policy p) {
  switch (p) {
    case Policy::all_layers: return "all_layers";
    case Policy::non_attention_linear: return "non_attention_linear";
    case Policy::none: return "none";
  }
  return "?";
}

double CompressionConfig::theta_floor(std::uint32_t ratio) {
  switch (ratio) {
    case 1: return 0.0;
    case 2: return 80.0;
    case 4: return 90.0;
    case 10: return 98.75;
    default: throw std::invalid_argument("compression ratio must be one of {1, 2, 4, 10}");
  }
}

void CompressionConfig::validate() const {
  if (!(theta >= 0.0 && theta <= 100.0))
    throw std::invalid_argument("theta must lie in [0, 100]");
  if (index_width != 1 && index_width != 4)
    throw std::invalid_argument("index width must be 1 or 4");
  if (sketch_rows == 0) throw std::invalid_argument("sketch needs at least one row");
  const double floor = theta_floor(ratio);  // also validates the ratio
  if (ratio > 1 && theta < floor && !allow_low_theta) {
    std::ostringstream os;
    os << "ratio " << ratio << " needs theta >= " << floor
       << " for lossless peeling (got " << theta
       << "); pass the low-theta override to run the estimation-heavy regime";
    throw std::invalid_argument(os.str());
  }
}

void CompressionConfig::validate_for_world(std::uint32_t world_size) const {
  validate();
  if (ratio > 1 && index_width == 4 && world_size > max_exact_world(4)) {
    throw std::invalid_argument(
        "a 4-bit index overflows its nibbles beyond 15 ranks; reduce the world size");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KvFile KvFile::parse_string(const std::string& text, const std::string& name) {
  KvFile kv;
  kv.name_ = name;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(name + ":" + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + t + "'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument(name + ":" + std::to_string(lineno) + ": empty key");
    if (!kv.values_.emplace(key, value).second)
      throw std::invalid_argument(name + ":" + std::to_string(lineno) + ": duplicate key '" +
                                  key + "'");
  }
  return kv;
}

KvFile KvFile::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_string(os.str(), path);
}

std::string KvFile::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument(name_ + ": missing required key '" + key + "'");
  return it->second;
}

std::string KvFile::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KvFile::get_double(const std::string& key, std::optional<double> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    if (fallback) return *fallback;
    throw std::invalid_argument(name_ + ": missing required key '" + key + "'");
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument(name_ + ": key '" + key + "' is not a number: '" + it->second +
                                "'");
  }
}

std::int64_t KvFile::get_int(const std::string& key, std::optional<std::int64_t> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    if (fallback) return *fallback;
    throw std::invalid_argument(name_ + ": missing required key '" + key + "'");
  }
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument(name_ + ": key '" + key + "' is not an integer: '" + it->second +
                                "'");
  }
}

std::uint64_t KvFile::get_uint(const std::string& key, std::optional<std::uint64_t> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    if (fallback) return *fallback;
    throw std::invalid_argument(name_ + ": missing required key '" + key + "'");
  }
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(it->second, &used);
    if (used != it->second.size() || it->second[0] == '-') throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument(name_ + ": key '" + key + "' is not an unsigned integer: '" +
                                it->second + "'");
  }
}

void KvFile::require_known(std::initializer_list<const char*> allowed) const {
  for (const auto& [key, value] : values_) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw std::invalid_argument(name_ + ": unknown key '" + key + "'");
  }
}

bool KvFile::get_bool(const std::string& key, std::optional<bool> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    if (fallback) return *fallback;
    throw std::invalid_argument(name_ + ": missing required key '" + key + "'");
  }
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::invalid_argument(name_ + ": key '" + key + "' is not a boolean: '" + it->second +
                              "'");
}

}  // namespace tagc
