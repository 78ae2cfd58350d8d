#pragma once
// Layer taxonomy and the selective-compression policy.

#include <cstdint>
#include <string>
#include <vector>

#include "tagc/config.hpp"

namespace tagc {

enum class LayerKind {
  embedding,
  positional_embedding,
  attention_qkv,
  attention_out_proj,
  feed_forward,
  lm_head,
  norm,
  bias,
  other,
};

LayerKind layer_kind_from_string(const std::string& s);
const char* to_string(LayerKind kind);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::other;
  std::uint64_t param_count = 0;
};

// Whether a layer of this kind is compressed under the policy. Norms and
// biases are never compressed: they are small enough to send as-is.
bool kind_compressible(LayerKind kind, Policy policy, bool include_out_proj);

struct ClassifyResult {
  std::vector<bool> flags;          // aligned with the input layers
  std::uint64_t total_params = 0;
  std::uint64_t flagged_params = 0;

  double flagged_share() const {
    return total_params == 0 ? 0.0
                             : static_cast<double>(flagged_params) /
                                   static_cast<double>(total_params);
  }
};

ClassifyResult classify_layers(const std::vector<LayerSpec>& layers, Policy policy,
                               bool include_out_proj = true);

}  // namespace tagc
