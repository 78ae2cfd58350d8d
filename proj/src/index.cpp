#include "tagc/index.hpp"

#include <stdexcept>

#include "tagc/kernels.hpp"

namespace tagc {

namespace {

void check_width(std::uint32_t width) {
  if (width != 1 && width != 4) throw std::invalid_argument("index width must be 1 or 4");
}

}  // namespace

std::uint32_t words_needed(std::uint32_t n, std::uint32_t width) {
  const std::uint64_t bits = static_cast<std::uint64_t>(n) * width;
  return static_cast<std::uint32_t>((bits + 31) / 32);
}

Index Index::zeros(std::uint32_t n, std::uint32_t width) {
  check_width(width);
  if (n == 0) throw std::invalid_argument("index needs at least one position");
  Index idx;
  idx.n = n;
  idx.width = width;
  idx.words.assign(words_needed(n, width), 0u);
  return idx;
}

Index Index::create(std::span<const float> values, std::uint32_t width) {
  Index idx = zeros(static_cast<std::uint32_t>(values.size()), width);
  for (std::uint32_t p = 0; p < idx.n; ++p) {
    if (values[p] != 0.0f) {  // -0.0 compares equal to zero and stays clear
      const std::uint64_t bit = static_cast<std::uint64_t>(p) * width;
      idx.words[bit >> 5] |= 1u << (bit & 31);
    }
  }
  return idx;
}

std::uint32_t Index::field(std::uint32_t p) const {
  if (p >= n) throw std::out_of_range("index position out of range");
  const std::uint64_t bit = static_cast<std::uint64_t>(p) * width;
  const std::uint32_t word = words[bit >> 5];
  const std::uint32_t mask = (width == 1) ? 1u : 0xFu;
  return (word >> (bit & 31)) & mask;
}

std::vector<std::uint32_t> Index::presence() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t p = 0; p < n; ++p) {
    if (field(p) != 0) out.push_back(p);
  }
  return out;
}

std::vector<std::uint8_t> Index::to_bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(words.size() * 4);
  for (std::uint32_t w : words) {
    out.push_back(static_cast<std::uint8_t>(w));
    out.push_back(static_cast<std::uint8_t>(w >> 8));
    out.push_back(static_cast<std::uint8_t>(w >> 16));
    out.push_back(static_cast<std::uint8_t>(w >> 24));
  }
  return out;
}

nlohmann::ordered_json Index::debug_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["width"] = width;
  j["words"] = words;
  j["presence"] = presence();
  return j;
}

Index merge_indices(std::span<const Index> locals) {
  if (locals.empty()) throw std::invalid_argument("merge_indices: no inputs");
  const Index& first = locals[0];
  std::vector<std::vector<std::uint32_t>> payloads;
  payloads.reserve(locals.size());
  for (const Index& idx : locals) {
    if (idx.n != first.n || idx.width != first.width)
      throw std::invalid_argument("merge_indices: mismatched index shapes");
    payloads.push_back(idx.words);
  }
  Index merged = Index::zeros(first.n, first.width);
  kernels::rank_sum_words(merged.words, payloads, kernels::Exec::serial);
  return merged;
}

std::uint32_t max_exact_world(std::uint32_t width) {
  check_width(width);
  return width == 4 ? 15u : 1u;
}

}  // namespace tagc
