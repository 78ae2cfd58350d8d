#pragma once
// Tape-based reverse-mode autodiff, just enough machinery for a small
// decoder-only transformer: matmul/linear, layer norm, GELU, causal
// multi-head attention, embedding lookup, mean cross-entropy. Dense 32-bit
// float, CPU only. Backward closures run in reverse creation order.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace tagc::ad {

struct Tensor {
  std::size_t rows = 0, cols = 0;
  std::vector<float> v;
  std::vector<float> g;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0f), g(r * c, 0.0f) {}

  std::size_t size() const { return rows * cols; }
  void zero_grad() { std::fill(g.begin(), g.end(), 0.0f); }
};

class Graph {
 public:
  using Id = std::size_t;

  // Values flow through graph-owned nodes; parameters stay external and
  // receive gradient accumulation during backward().
  Id embed(Tensor& token_table, Tensor& pos_table, std::span<const std::int32_t> tokens,
           std::size_t batch, std::size_t ctx);
  Id linear(Id x, Tensor& weight, Tensor* bias);           // x[N,in] * W[in,out] + b
  Id linear_transposed(Id x, Tensor& weight);              // x[N,in] * W[out,in]^T (tied head)
  Id add(Id a, Id b);
  Id gelu(Id x);
  Id layer_norm(Id x, Tensor& gain, Tensor& bias);
  Id causal_attention(Id qkv, std::size_t heads, std::size_t batch, std::size_t ctx);

  // Mean cross-entropy over all rows; seeds the backward pass.
  float cross_entropy(Id logits, std::span<const std::int32_t> targets);

  void backward();

  const std::vector<float>& values(Id id) const { return nodes_[id].v; }
  std::size_t node_rows(Id id) const { return nodes_[id].rows; }
  std::size_t node_cols(Id id) const { return nodes_[id].cols; }

 private:
  struct Node {
    std::size_t rows = 0, cols = 0;
    std::vector<float> v, g;
  };

  Id new_node(std::size_t rows, std::size_t cols);

  std::vector<Node> nodes_;
  std::vector<std::function<void()>> tape_;
  bool loss_taken_ = false;
};

// Row-wise softmax cross-entropy against integer targets; returns the mean
// loss and writes d(loss)/d(logits) when dlogits is non-empty. Exposed for
// direct testing.
float cross_entropy_mean(std::span<const float> logits, std::size_t rows, std::size_t cols,
                         std::span<const std::int32_t> targets, std::span<float> dlogits);

float gelu_value(float x);

}  // namespace tagc::ad
