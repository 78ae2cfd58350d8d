#pragma once
// Small decoder-only character-level transformer with named parameter
// tensors, so the layer policy can classify every block of the flat
// parameter space.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tagc/autodiff.hpp"
#include "tagc/config.hpp"
#include "tagc/layers.hpp"

namespace tagc {

struct TinyModelConfig {
  std::uint32_t layers = 2;
  std::uint32_t d_model = 64;
  std::uint32_t heads = 4;
  std::uint32_t ffn_mult = 4;
  std::uint32_t vocab = 256;
  std::uint32_t ctx = 64;
  bool untied_head = true;

  void validate() const;
  static TinyModelConfig from_kv(const KvFile& kv, const std::string& prefix = "model.");
};

// Closed-form count of trainable parameters for a config.
std::uint64_t model_param_count(const TinyModelConfig& config);

// The named parameter tensors of a GPT-2-shaped model at the given dims,
// without allocating the tensors; used for analytic classification reports.
std::vector<LayerSpec> model_layer_specs(const TinyModelConfig& config);

struct Batch {
  std::vector<std::int32_t> tokens;   // batch*ctx token ids
  std::vector<std::int32_t> targets;  // next-token targets, same shape
  std::size_t batch = 0;
  std::size_t ctx = 0;
};

struct Model {
  TinyModelConfig config;
  std::vector<ad::Tensor> params;  // aligned with specs
  std::vector<LayerSpec> specs;

  std::uint64_t param_count() const;
  void zero_grads();

  // Flat parameter space in spec order.
  void copy_flat_params(std::span<float> out) const;
  void load_flat_params(std::span<const float> in);
  void copy_flat_grads(std::span<float> out) const;
};

Model build_model(const TinyModelConfig& config, std::uint64_t seed);

// Mean next-token cross-entropy and parameter gradients (accumulated into
// params[i].g after zeroing). Deterministic for fixed inputs.
float loss_and_gradients(Model& model, const Batch& batch);

// Forward-only loss, for evaluation.
float loss_only(Model& model, const Batch& batch);

}  // namespace tagc
