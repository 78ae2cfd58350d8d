#include "tagc/model.hpp"

#include <cmath>
#include <stdexcept>

#include "tagc/hash.hpp"

namespace tagc {

void TinyModelConfig::validate() const {
  if (layers == 0 || d_model == 0 || heads == 0 || ffn_mult == 0 || vocab == 0 || ctx == 0)
    throw std::invalid_argument("model dims must all be at least 1");
  if (d_model % heads != 0)
    throw std::invalid_argument("model width must be divisible by the head count");
}

TinyModelConfig TinyModelConfig::from_kv(const KvFile& kv, const std::string& prefix) {
  TinyModelConfig c;
  c.layers = static_cast<std::uint32_t>(kv.get_uint(prefix + "layers", c.layers));
  c.d_model = static_cast<std::uint32_t>(kv.get_uint(prefix + "d_model", c.d_model));
  c.heads = static_cast<std::uint32_t>(kv.get_uint(prefix + "heads", c.heads));
  c.ffn_mult = static_cast<std::uint32_t>(kv.get_uint(prefix + "ffn_mult", c.ffn_mult));
  c.vocab = static_cast<std::uint32_t>(kv.get_uint(prefix + "vocab", c.vocab));
  c.ctx = static_cast<std::uint32_t>(kv.get_uint(prefix + "ctx", c.ctx));
  c.untied_head = kv.get_bool(prefix + "untied_head", c.untied_head);
  c.validate();
  return c;
}

namespace {

struct TensorPlan {
  std::string name;
  LayerKind kind;
  std::size_t rows, cols;
  enum class Init { normal, zeros, ones } init;
};

std::vector<TensorPlan> plan_tensors(const TinyModelConfig& c) {
  using Init = TensorPlan::Init;
  const std::size_t d = c.d_model, mu = c.ffn_mult;
  std::vector<TensorPlan> plan;
  plan.push_back({"wte", LayerKind::embedding, c.vocab, d, Init::normal});
  plan.push_back({"wpe", LayerKind::positional_embedding, c.ctx, d, Init::normal});
  for (std::uint32_t l = 0; l < c.layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    plan.push_back({p + "ln1.g", LayerKind::norm, 1, d, Init::ones});
    plan.push_back({p + "ln1.b", LayerKind::norm, 1, d, Init::zeros});
    plan.push_back({p + "attn.qkv.w", LayerKind::attention_qkv, d, 3 * d, Init::normal});
    plan.push_back({p + "attn.qkv.b", LayerKind::bias, 1, 3 * d, Init::zeros});
    plan.push_back({p + "attn.proj.w", LayerKind::attention_out_proj, d, d, Init::normal});
    plan.push_back({p + "attn.proj.b", LayerKind::bias, 1, d, Init::zeros});
    plan.push_back({p + "ln2.g", LayerKind::norm, 1, d, Init::ones});
    plan.push_back({p + "ln2.b", LayerKind::norm, 1, d, Init::zeros});
    plan.push_back({p + "mlp.fc.w", LayerKind::feed_forward, d, mu * d, Init::normal});
    plan.push_back({p + "mlp.fc.b", LayerKind::bias, 1, mu * d, Init::zeros});
    plan.push_back({p + "mlp.proj.w", LayerKind::feed_forward, mu * d, d, Init::normal});
    plan.push_back({p + "mlp.proj.b", LayerKind::bias, 1, d, Init::zeros});
  }
  plan.push_back({"ln_f.g", LayerKind::norm, 1, d, Init::ones});
  plan.push_back({"ln_f.b", LayerKind::norm, 1, d, Init::zeros});
  if (c.untied_head) plan.push_back({"lm_head", LayerKind::lm_head, d, c.vocab, Init::normal});
  return plan;
}

}  // namespace

std::vector<LayerSpec> model_layer_specs(const TinyModelConfig& config) {
  config.validate();
  std::vector<LayerSpec> specs;
  for (const TensorPlan& t : plan_tensors(config))
    specs.push_back({t.name, t.kind, static_cast<std::uint64_t>(t.rows) * t.cols});
  return specs;
}

std::uint64_t model_param_count(const TinyModelConfig& config) {
  std::uint64_t total = 0;
  for (const LayerSpec& s : model_layer_specs(config)) total += s.param_count;
  return total;
}

std::uint64_t Model::param_count() const {
  std::uint64_t total = 0;
  for (const ad::Tensor& t : params) total += t.size();
  return total;
}

void Model::zero_grads() {
  for (ad::Tensor& t : params) t.zero_grad();
}

void Model::copy_flat_params(std::span<float> out) const {
  std::size_t off = 0;
  for (const ad::Tensor& t : params) {
    if (off + t.size() > out.size()) throw std::invalid_argument("flat buffer too small");
    std::copy(t.v.begin(), t.v.end(), out.begin() + off);
    off += t.size();
  }
}

void Model::load_flat_params(std::span<const float> in) {
  std::size_t off = 0;
  for (ad::Tensor& t : params) {
    if (off + t.size() > in.size()) throw std::invalid_argument("flat buffer too small");
    std::copy(in.begin() + off, in.begin() + off + t.size(), t.v.begin());
    off += t.size();
  }
}

void Model::copy_flat_grads(std::span<float> out) const {
  std::size_t off = 0;
  for (const ad::Tensor& t : params) {
    if (off + t.size() > out.size()) throw std::invalid_argument("flat buffer too small");
    std::copy(t.g.begin(), t.g.end(), out.begin() + off);
    off += t.size();
  }
}

Model build_model(const TinyModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  const auto plan = plan_tensors(config);
  m.params.reserve(plan.size());
  m.specs.reserve(plan.size());
  std::size_t tensor_idx = 0;
  for (const TensorPlan& t : plan) {
    ad::Tensor tensor(t.rows, t.cols);
    // Each tensor draws from its own stream so the init is independent of
    // iteration order.
    Rng rng(splitmix64(seed ^ (0xC2B2AE3D27D4EB4FULL * (tensor_idx + 1))));
    switch (t.init) {
      case TensorPlan::Init::normal:
        for (float& x : tensor.v) x = 0.02f * static_cast<float>(rng_normal(rng));
        break;
      case TensorPlan::Init::ones:
        std::fill(tensor.v.begin(), tensor.v.end(), 1.0f);
        break;
      case TensorPlan::Init::zeros:
        break;
    }
    m.params.push_back(std::move(tensor));
    m.specs.push_back({t.name, t.kind, static_cast<std::uint64_t>(t.rows) * t.cols});
    ++tensor_idx;
  }
  return m;
}

namespace {

// Tensor indices by role, resolved from the fixed build order.
struct ParamView {
  ad::Tensor* wte;
  ad::Tensor* wpe;
  struct BlockView {
    ad::Tensor *ln1g, *ln1b, *qkv_w, *qkv_b, *proj_w, *proj_b, *ln2g, *ln2b, *fc_w, *fc_b,
        *fc2_w, *fc2_b;
  };
  std::vector<BlockView> blocks;
  ad::Tensor *lnf_g, *lnf_b;
  ad::Tensor* head;  // null when tied
};

ParamView view_params(Model& m) {
  ParamView v{};
  std::size_t i = 0;
  v.wte = &m.params[i++];
  v.wpe = &m.params[i++];
  v.blocks.resize(m.config.layers);
  for (auto& b : v.blocks) {
    b.ln1g = &m.params[i++];
    b.ln1b = &m.params[i++];
    b.qkv_w = &m.params[i++];
    b.qkv_b = &m.params[i++];
    b.proj_w = &m.params[i++];
    b.proj_b = &m.params[i++];
    b.ln2g = &m.params[i++];
    b.ln2b = &m.params[i++];
    b.fc_w = &m.params[i++];
    b.fc_b = &m.params[i++];
    b.fc2_w = &m.params[i++];
    b.fc2_b = &m.params[i++];
  }
  v.lnf_g = &m.params[i++];
  v.lnf_b = &m.params[i++];
  v.head = m.config.untied_head ? &m.params[i++] : nullptr;
  return v;
}

float forward(Model& model, const Batch& batch, ad::Graph& graph,
              std::span<const std::int32_t> targets) {
  if (batch.tokens.size() != batch.batch * batch.ctx)
    throw std::invalid_argument("batch token count does not match its shape");
  if (batch.ctx > model.config.ctx)
    throw std::invalid_argument("batch context exceeds the model context window");
  ParamView pv = view_params(model);
  ad::Graph::Id x = graph.embed(*pv.wte, *pv.wpe, batch.tokens, batch.batch, batch.ctx);
  for (auto& b : pv.blocks) {
    ad::Graph::Id a = graph.layer_norm(x, *b.ln1g, *b.ln1b);
    ad::Graph::Id qkv = graph.linear(a, *b.qkv_w, b.qkv_b);
    ad::Graph::Id att =
        graph.causal_attention(qkv, model.config.heads, batch.batch, batch.ctx);
    ad::Graph::Id proj = graph.linear(att, *b.proj_w, b.proj_b);
    x = graph.add(x, proj);
    ad::Graph::Id a2 = graph.layer_norm(x, *b.ln2g, *b.ln2b);
    ad::Graph::Id h = graph.linear(a2, *b.fc_w, b.fc_b);
    h = graph.gelu(h);
    ad::Graph::Id h2 = graph.linear(h, *b.fc2_w, b.fc2_b);
    x = graph.add(x, h2);
  }
  ad::Graph::Id xf = graph.layer_norm(x, *pv.lnf_g, *pv.lnf_b);
  ad::Graph::Id logits =
      pv.head ? graph.linear(xf, *pv.head, nullptr) : graph.linear_transposed(xf, *pv.wte);
  return graph.cross_entropy(logits, targets);
}

}  // namespace

float loss_and_gradients(Model& model, const Batch& batch) {
  model.zero_grads();
  ad::Graph graph;
  const float loss = forward(model, batch, graph, batch.targets);
  graph.backward();
  return loss;
}

float loss_only(Model& model, const Batch& batch) {
  ad::Graph graph;
  return forward(model, batch, graph, batch.targets);
}

}  // namespace tagc
