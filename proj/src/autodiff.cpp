#include "tagc/autodiff.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "tagc/kernels.hpp"

namespace tagc::ad {

namespace {

constexpr float kGeluScale = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluCubic = 0.044715f;

inline std::int64_t ssize_of(std::size_t n) { return static_cast<std::int64_t>(n); }

}  // namespace

float gelu_value(float x) {
  const float inner = kGeluScale * (x + kGeluCubic * x * x * x);
  return 0.5f * x * (1.0f + std::tanh(inner));
}

Graph::Id Graph::new_node(std::size_t rows, std::size_t cols) {
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.v.assign(rows * cols, 0.0f);
  n.g.assign(rows * cols, 0.0f);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Graph::Id Graph::embed(Tensor& token_table, Tensor& pos_table,
                       std::span<const std::int32_t> tokens, std::size_t batch,
                       std::size_t ctx) {
  if (tokens.size() != batch * ctx) throw std::invalid_argument("embed: bad token count");
  if (pos_table.rows < ctx) throw std::invalid_argument("embed: context exceeds position table");
  const std::size_t d = token_table.cols;
  const std::size_t n = batch * ctx;
  for (std::size_t i = 0; i < n; ++i) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= token_table.rows)
      throw std::invalid_argument("embed: token id out of vocabulary");
  }
  const Id out = new_node(n, d);
  Node& node = nodes_[out];
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < ssize_of(n); ++i) {
    const float* te = token_table.v.data() + static_cast<std::size_t>(tokens[i]) * d;
    const float* pe = pos_table.v.data() + (i % ctx) * d;
    float* row = node.v.data() + i * d;
    for (std::size_t c = 0; c < d; ++c) row[c] = te[c] + pe[c];
  }
  tape_.push_back([this, out, &token_table, &pos_table,
                   toks = std::vector<std::int32_t>(tokens.begin(), tokens.end()), ctx, d, n] {
    const Node& o = nodes_[out];
    // Column-partitioned scatter-add: repeated token ids hit the same
    // gradient row, so threads split columns and keep row order fixed.
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < ssize_of(d); ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const float dy = o.g[i * d + c];
        token_table.g[static_cast<std::size_t>(toks[i]) * d + c] += dy;
        pos_table.g[(i % ctx) * d + c] += dy;
      }
    }
  });
  return out;
}

Graph::Id Graph::linear(Id x, Tensor& weight, Tensor* bias) {
  if (nodes_[x].cols != weight.rows) throw std::invalid_argument("linear: shape mismatch");
  if (bias && bias->size() != weight.cols) throw std::invalid_argument("linear: bad bias shape");
  const std::size_t n = nodes_[x].rows, k = nodes_[x].cols, m = weight.cols;
  const Id out = new_node(n, m);  // may move nodes_: take references after
  Node& node = nodes_[out];
  kernels::matmul(nodes_[x].v.data(), weight.v.data(), node.v.data(), n, k, m);
  if (bias) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < ssize_of(n); ++i) {
      float* row = node.v.data() + i * m;
      for (std::size_t c = 0; c < m; ++c) row[c] += bias->v[c];
    }
  }
  tape_.push_back([this, x, out, &weight, bias, n, k, m] {
    Node& in_node = nodes_[x];
    const Node& o = nodes_[out];
    // dX += dY * W^T, dW += X^T * dY
    kernels::matmul_nt(o.g.data(), weight.v.data(), in_node.g.data(), n, m, k, 1.0f);
    kernels::matmul_tn(in_node.v.data(), o.g.data(), weight.g.data(), n, k, m, 1.0f);
    if (bias) {
#pragma omp parallel for schedule(static)
      for (std::int64_t c = 0; c < ssize_of(m); ++c) {
        float acc = bias->g[c];
        for (std::size_t i = 0; i < n; ++i) acc += o.g[i * m + c];
        bias->g[c] = acc;
      }
    }
  });
  return out;
}

Graph::Id Graph::linear_transposed(Id x, Tensor& weight) {
  if (nodes_[x].cols != weight.cols)
    throw std::invalid_argument("linear_transposed: shape mismatch");
  const std::size_t n = nodes_[x].rows, k = nodes_[x].cols, m = weight.rows;
  const Id out = new_node(n, m);
  kernels::matmul_nt(nodes_[x].v.data(), weight.v.data(), nodes_[out].v.data(), n, k, m);
  tape_.push_back([this, x, out, &weight, n, k, m] {
    Node& in_node = nodes_[x];
    const Node& o = nodes_[out];
    // dX += dY * W, dW += dY^T * X
    kernels::matmul(o.g.data(), weight.v.data(), in_node.g.data(), n, m, k, 1.0f);
    kernels::matmul_tn(o.g.data(), in_node.v.data(), weight.g.data(), n, m, k, 1.0f);
  });
  return out;
}

Graph::Id Graph::add(Id a, Id b) {
  if (nodes_[a].rows != nodes_[b].rows || nodes_[a].cols != nodes_[b].cols)
    throw std::invalid_argument("add: shape mismatch");
  const Id out = new_node(nodes_[a].rows, nodes_[a].cols);
  Node& node = nodes_[out];
  for (std::size_t i = 0; i < node.v.size(); ++i) node.v[i] = nodes_[a].v[i] + nodes_[b].v[i];
  tape_.push_back([this, a, b, out] {
    const Node& o = nodes_[out];
    kernels::add_inplace(nodes_[a].g, o.g);
    kernels::add_inplace(nodes_[b].g, o.g);
  });
  return out;
}

Graph::Id Graph::gelu(Id x) {
  const Node& in = nodes_[x];
  const Id out = new_node(in.rows, in.cols);
  Node& node = nodes_[out];
  const std::size_t n = node.v.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < ssize_of(n); ++i) node.v[i] = gelu_value(nodes_[x].v[i]);
  tape_.push_back([this, x, out, n] {
    Node& in_node = nodes_[x];
    const Node& o = nodes_[out];
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < ssize_of(n); ++i) {
      const float v = in_node.v[i];
      const float inner = kGeluScale * (v + kGeluCubic * v * v * v);
      const float t = std::tanh(inner);
      const float sech2 = 1.0f - t * t;
      const float d = 0.5f * (1.0f + t) +
                      0.5f * v * sech2 * kGeluScale * (1.0f + 3.0f * kGeluCubic * v * v);
      in_node.g[i] += d * o.g[i];
    }
  });
  return out;
}

Graph::Id Graph::layer_norm(Id x, Tensor& gain, Tensor& bias) {
  const Node& in = nodes_[x];
  const std::size_t n = in.rows, d = in.cols;
  if (gain.size() != d || bias.size() != d)
    throw std::invalid_argument("layer_norm: parameter shape mismatch");
  constexpr float kEps = 1e-5f;
  const Id out = new_node(n, d);
  Node& node = nodes_[out];
  // Normalized activations are recomputed in backward; cache inverse sigma.
  std::vector<float> inv_sigma(n), mean(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < ssize_of(n); ++i) {
    const float* row = nodes_[x].v.data() + i * d;
    float mu = 0.0f;
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<float>(d);
    float var = 0.0f;
    for (std::size_t c = 0; c < d; ++c) {
      const float z = row[c] - mu;
      var += z * z;
    }
    var /= static_cast<float>(d);
    const float is = 1.0f / std::sqrt(var + kEps);
    mean[i] = mu;
    inv_sigma[i] = is;
    float* orow = node.v.data() + i * d;
    for (std::size_t c = 0; c < d; ++c) orow[c] = (row[c] - mu) * is * gain.v[c] + bias.v[c];
  }
  tape_.push_back([this, x, out, &gain, &bias, n, d, mean = std::move(mean),
                   inv_sigma = std::move(inv_sigma)] {
    Node& in_node = nodes_[x];
    const Node& o = nodes_[out];
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < ssize_of(n); ++i) {
      const float* row = in_node.v.data() + i * d;
      const float* dy = o.g.data() + i * d;
      const float is = inv_sigma[i], mu = mean[i];
      float sum_dxhat = 0.0f, sum_dxhat_xhat = 0.0f;
      for (std::size_t c = 0; c < d; ++c) {
        const float xhat = (row[c] - mu) * is;
        const float dxhat = dy[c] * gain.v[c];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
      }
      const float inv_d = 1.0f / static_cast<float>(d);
      float* dx = in_node.g.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) {
        const float xhat = (row[c] - mu) * is;
        const float dxhat = dy[c] * gain.v[c];
        dx[c] += is * (dxhat - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat);
      }
    }
    // Parameter grads: column-partitioned to keep accumulation order fixed.
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < ssize_of(d); ++c) {
      float dg = 0.0f, db = 0.0f;
      for (std::size_t i = 0; i < n; ++i) {
        const float xhat = (in_node.v[i * d + c] - mean[i]) * inv_sigma[i];
        dg += o.g[i * d + c] * xhat;
        db += o.g[i * d + c];
      }
      gain.g[c] += dg;
      bias.g[c] += db;
    }
  });
  return out;
}

Graph::Id Graph::causal_attention(Id qkv, std::size_t heads, std::size_t batch,
                                  std::size_t ctx) {
  if (nodes_[qkv].rows != batch * ctx) throw std::invalid_argument("attention: bad row count");
  if (nodes_[qkv].cols % 3 != 0)
    throw std::invalid_argument("attention: qkv width not divisible by 3");
  const std::size_t d = nodes_[qkv].cols / 3;
  if (d % heads != 0) throw std::invalid_argument("attention: width not divisible by heads");
  const std::size_t dh = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  const Id out = new_node(nodes_[qkv].rows, d);
  const Node& in = nodes_[qkv];
  Node& node = nodes_[out];
  // Softmax probabilities cached for backward: batch*heads*ctx*ctx.
  auto probs = std::make_shared<std::vector<float>>(batch * heads * ctx * ctx, 0.0f);

  const std::int64_t groups = ssize_of(batch * heads);
#pragma omp parallel for schedule(static)
  for (std::int64_t bh = 0; bh < groups; ++bh) {
    const std::size_t b = static_cast<std::size_t>(bh) / heads;
    const std::size_t h = static_cast<std::size_t>(bh) % heads;
    const std::size_t row0 = b * ctx;
    const std::size_t qoff = h * dh, koff = d + h * dh, voff = 2 * d + h * dh;
    float* p = probs->data() + static_cast<std::size_t>(bh) * ctx * ctx;
    for (std::size_t i = 0; i < ctx; ++i) {
      const float* qi = in.v.data() + (row0 + i) * in.cols + qoff;
      float* prow = p + i * ctx;
      float maxs = -1e30f;
      for (std::size_t j = 0; j <= i; ++j) {
        const float* kj = in.v.data() + (row0 + j) * in.cols + koff;
        float s = 0.0f;
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        s *= scale;
        prow[j] = s;
        if (s > maxs) maxs = s;
      }
      float denom = 0.0f;
      for (std::size_t j = 0; j <= i; ++j) {
        prow[j] = std::exp(prow[j] - maxs);
        denom += prow[j];
      }
      const float inv = 1.0f / denom;
      for (std::size_t j = 0; j <= i; ++j) prow[j] *= inv;
      float* orow = node.v.data() + (row0 + i) * d + h * dh;
      for (std::size_t c = 0; c < dh; ++c) orow[c] = 0.0f;
      for (std::size_t j = 0; j <= i; ++j) {
        const float* vj = in.v.data() + (row0 + j) * in.cols + voff;
        const float pj = prow[j];
        for (std::size_t c = 0; c < dh; ++c) orow[c] += pj * vj[c];
      }
    }
  }

  tape_.push_back([this, qkv, out, probs, heads, batch, ctx, d, dh, scale] {
    Node& in_node = nodes_[qkv];
    const Node& o = nodes_[out];
    const std::int64_t groups = ssize_of(batch * heads);
    // (batch, head) groups touch disjoint column slices of the qkv gradient.
#pragma omp parallel for schedule(static)
    for (std::int64_t bh = 0; bh < groups; ++bh) {
      const std::size_t b = static_cast<std::size_t>(bh) / heads;
      const std::size_t h = static_cast<std::size_t>(bh) % heads;
      const std::size_t row0 = b * ctx;
      const std::size_t qoff = h * dh, koff = d + h * dh, voff = 2 * d + h * dh;
      const float* p = probs->data() + static_cast<std::size_t>(bh) * ctx * ctx;
      std::vector<float> dp(ctx);
      for (std::size_t i = 0; i < ctx; ++i) {
        const float* dout = o.g.data() + (row0 + i) * d + h * dh;
        const float* prow = p + i * ctx;
        // dV and dP
        float dp_dot_p = 0.0f;
        for (std::size_t j = 0; j <= i; ++j) {
          const float* vj = in_node.v.data() + (row0 + j) * in_node.cols + voff;
          float acc = 0.0f;
          for (std::size_t c = 0; c < dh; ++c) acc += dout[c] * vj[c];
          dp[j] = acc;
          dp_dot_p += acc * prow[j];
          float* dvj = in_node.g.data() + (row0 + j) * in_node.cols + voff;
          const float pj = prow[j];
          for (std::size_t c = 0; c < dh; ++c) dvj[c] += pj * dout[c];
        }
        // softmax jacobian, then dQ/dK
        const float* qi = in_node.v.data() + (row0 + i) * in_node.cols + qoff;
        float* dqi = in_node.g.data() + (row0 + i) * in_node.cols + qoff;
        for (std::size_t j = 0; j <= i; ++j) {
          const float ds = prow[j] * (dp[j] - dp_dot_p) * scale;
          const float* kj = in_node.v.data() + (row0 + j) * in_node.cols + koff;
          float* dkj = in_node.g.data() + (row0 + j) * in_node.cols + koff;
          for (std::size_t c = 0; c < dh; ++c) {
            dqi[c] += ds * kj[c];
            dkj[c] += ds * qi[c];
          }
        }
      }
    }
  });
  return out;
}

float cross_entropy_mean(std::span<const float> logits, std::size_t rows, std::size_t cols,
                         std::span<const std::int32_t> targets, std::span<float> dlogits) {
  if (logits.size() != rows * cols) throw std::invalid_argument("cross_entropy: bad logits size");
  if (targets.size() != rows) throw std::invalid_argument("cross_entropy: bad target count");
  if (!dlogits.empty() && dlogits.size() != logits.size())
    throw std::invalid_argument("cross_entropy: bad gradient size");
  for (std::size_t i = 0; i < rows; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= cols)
      throw std::invalid_argument("cross_entropy: target out of range");
  }
  std::vector<float> row_loss(rows);
  const float inv_rows = 1.0f / static_cast<float>(rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < ssize_of(rows); ++i) {
    const float* row = logits.data() + i * cols;
    float maxv = row[0];
    for (std::size_t c = 1; c < cols; ++c) maxv = std::max(maxv, row[c]);
    float denom = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) denom += std::exp(row[c] - maxv);
    const float lse = maxv + std::log(denom);
    row_loss[i] = lse - row[targets[i]];
    if (!dlogits.empty()) {
      float* drow = dlogits.data() + i * cols;
      const float inv_denom = 1.0f / denom;
      for (std::size_t c = 0; c < cols; ++c)
        drow[c] = std::exp(row[c] - maxv) * inv_denom * inv_rows;
      drow[targets[i]] -= inv_rows;
    }
  }
  // Fixed-order reduction keeps the loss bit-stable across thread counts.
  float loss = 0.0f;
  for (std::size_t i = 0; i < rows; ++i) loss += row_loss[i];
  return loss * inv_rows;
}

float Graph::cross_entropy(Id logits, std::span<const std::int32_t> targets) {
  if (loss_taken_) throw std::logic_error("cross_entropy may only be taken once per graph");
  loss_taken_ = true;
  Node& node = nodes_[logits];
  return cross_entropy_mean(node.v, node.rows, node.cols, targets, node.g);
}

void Graph::backward() {
  if (!loss_taken_) throw std::logic_error("backward() before a loss was taken");
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
}

}  // namespace tagc::ad
