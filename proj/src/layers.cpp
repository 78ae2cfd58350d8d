#include "tagc/layers.hpp"

#include <stdexcept>

namespace tagc {

namespace {

struct KindName {
  LayerKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {LayerKind::embedding, "embedding"},
    {LayerKind::positional_embedding, "positional_embedding"},
    {LayerKind::attention_qkv, "attention_qkv"},
    {LayerKind::attention_out_proj, "attention_out_proj"},
    {LayerKind::feed_forward, "feed_forward"},
    {LayerKind::lm_head, "lm_head"},
    {LayerKind::norm, "norm"},
    {LayerKind::bias, "bias"},
    {LayerKind::other, "other"},
};

}  // namespace

LayerKind layer_kind_from_string(const std::string& s) {
  for (const auto& kn : kKindNames) {
    if (s == kn.name) return kn.kind;
  }
  throw std::invalid_argument("unknown layer kind: " + s);
}

const char* to_string(LayerKind kind) {
  for (const auto& kn : kKindNames) {
    if (kind == kn.kind) return kn.name;
  }
  return "?";
}

bool kind_compressible(LayerKind kind, Policy policy, bool include_out_proj) {
  switch (policy) {
    case Policy::none:
      return false;
    case Policy::all_layers:
      return true;
    case Policy::non_attention_linear:
      switch (kind) {
        case LayerKind::embedding:
        case LayerKind::positional_embedding:
        case LayerKind::feed_forward:
        case LayerKind::lm_head:
          return true;
        case LayerKind::attention_out_proj:
          return include_out_proj;
        case LayerKind::attention_qkv:
        case LayerKind::norm:
        case LayerKind::bias:
        case LayerKind::other:
          return false;
      }
  }
  return false;
}

ClassifyResult classify_layers(const std::vector<LayerSpec>& layers, Policy policy,
                               bool include_out_proj) {
  ClassifyResult res;
  res.flags.reserve(layers.size());
  for (const LayerSpec& layer : layers) {
    if (layer.param_count == 0)
      throw std::invalid_argument("layer '" + layer.name + "' has no parameters");
    const bool flagged = kind_compressible(layer.kind, policy, include_out_proj);
    res.flags.push_back(flagged);
    res.total_params += layer.param_count;
    if (flagged) res.flagged_params += layer.param_count;
  }
  return res;
}

}  // namespace tagc
