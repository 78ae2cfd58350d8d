#pragma once
// Independent double-precision reference forward pass for the transformer,
// used as the finite-difference gradcheck oracle. Plain loops, no shared code
// with the library's float path beyond the architecture definition itself.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tagc/model.hpp"

namespace testing_oracles {

using tagc::Batch;
using tagc::Model;
using tagc::TinyModelConfig;

struct RefForward {
  TinyModelConfig cfg;
  std::vector<std::vector<double>> params;

  explicit RefForward(const Model& m) : cfg(m.config) {
    for (const auto& t : m.params) params.emplace_back(t.v.begin(), t.v.end());
  }

  static double gelu(double x) {
    const double inner = 0.7978845608028654 * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(inner));
  }

  static std::vector<double> layer_norm(const std::vector<double>& x, std::size_t rows,
                                        std::size_t d, const std::vector<double>& g,
                                        const std::vector<double>& b) {
    std::vector<double> out(rows * d);
    for (std::size_t i = 0; i < rows; ++i) {
      double mu = 0.0;
      for (std::size_t c = 0; c < d; ++c) mu += x[i * d + c];
      mu /= static_cast<double>(d);
      double var = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double z = x[i * d + c] - mu;
        var += z * z;
      }
      var /= static_cast<double>(d);
      const double is = 1.0 / std::sqrt(var + 1e-5);
      for (std::size_t c = 0; c < d; ++c)
        out[i * d + c] = (x[i * d + c] - mu) * is * g[c] + b[c];
    }
    return out;
  }

  static std::vector<double> linear(const std::vector<double>& x, std::size_t rows,
                                    std::size_t in, std::size_t out_dim,
                                    const std::vector<double>& w, const std::vector<double>* b) {
    std::vector<double> out(rows * out_dim, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t k = 0; k < in; ++k) {
        const double a = x[i * in + k];
        for (std::size_t j = 0; j < out_dim; ++j) out[i * out_dim + j] += a * w[k * out_dim + j];
      }
      if (b)
        for (std::size_t j = 0; j < out_dim; ++j) out[i * out_dim + j] += (*b)[j];
    }
    return out;
  }

  double loss(const Batch& batch) const {
    const std::size_t d = cfg.d_model, B = batch.batch, C = batch.ctx, N = B * C;
    const std::size_t heads = cfg.heads, dh = d / heads, mu = cfg.ffn_mult;
    std::size_t pi = 0;
    const auto& wte = params[pi++];
    const auto& wpe = params[pi++];
    std::vector<double> x(N * d);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t c = 0; c < d; ++c)
        x[i * d + c] = wte[batch.tokens[i] * d + c] + wpe[(i % C) * d + c];

    for (std::uint32_t l = 0; l < cfg.layers; ++l) {
      const auto& ln1g = params[pi++];
      const auto& ln1b = params[pi++];
      const auto& qkv_w = params[pi++];
      const auto& qkv_b = params[pi++];
      const auto& proj_w = params[pi++];
      const auto& proj_b = params[pi++];
      const auto& ln2g = params[pi++];
      const auto& ln2b = params[pi++];
      const auto& fc_w = params[pi++];
      const auto& fc_b = params[pi++];
      const auto& fc2_w = params[pi++];
      const auto& fc2_b = params[pi++];

      const auto a = layer_norm(x, N, d, ln1g, ln1b);
      const auto qkv = linear(a, N, d, 3 * d, qkv_w, &qkv_b);
      std::vector<double> att(N * d, 0.0);
      const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t qo = h * dh, ko = d + h * dh, vo = 2 * d + h * dh;
          for (std::size_t i = 0; i < C; ++i) {
            std::vector<double> row(i + 1);
            double maxs = -1e300;
            for (std::size_t j = 0; j <= i; ++j) {
              double s = 0.0;
              for (std::size_t c = 0; c < dh; ++c)
                s += qkv[(b * C + i) * 3 * d + qo + c] * qkv[(b * C + j) * 3 * d + ko + c];
              row[j] = s * scale;
              maxs = std::max(maxs, row[j]);
            }
            double denom = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
              row[j] = std::exp(row[j] - maxs);
              denom += row[j];
            }
            for (std::size_t j = 0; j <= i; ++j) {
              const double p = row[j] / denom;
              for (std::size_t c = 0; c < dh; ++c)
                att[(b * C + i) * d + h * dh + c] += p * qkv[(b * C + j) * 3 * d + vo + c];
            }
          }
        }
      }
      const auto proj = linear(att, N, d, d, proj_w, &proj_b);
      for (std::size_t i = 0; i < N * d; ++i) x[i] += proj[i];
      const auto a2 = layer_norm(x, N, d, ln2g, ln2b);
      auto h1 = linear(a2, N, d, mu * d, fc_w, &fc_b);
      for (auto& v : h1) v = gelu(v);
      const auto h2 = linear(h1, N, mu * d, d, fc2_w, &fc2_b);
      for (std::size_t i = 0; i < N * d; ++i) x[i] += h2[i];
    }
    const auto& lnf_g = params[pi++];
    const auto& lnf_b = params[pi++];
    const auto xf = layer_norm(x, N, d, lnf_g, lnf_b);
    std::vector<double> logits;
    if (cfg.untied_head) {
      logits = linear(xf, N, d, cfg.vocab, params[pi++], nullptr);
    } else {
      logits.assign(N * cfg.vocab, 0.0);
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t v = 0; v < cfg.vocab; ++v) {
          double s = 0.0;
          for (std::size_t c = 0; c < d; ++c) s += xf[i * d + c] * wte[v * d + c];
          logits[i * cfg.vocab + v] = s;
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      double maxv = -1e300;
      for (std::size_t v = 0; v < cfg.vocab; ++v)
        maxv = std::max(maxv, logits[i * cfg.vocab + v]);
      double denom = 0.0;
      for (std::size_t v = 0; v < cfg.vocab; ++v)
        denom += std::exp(logits[i * cfg.vocab + v] - maxv);
      total += maxv + std::log(denom) - logits[i * cfg.vocab + batch.targets[i]];
    }
    return total / static_cast<double>(N);
  }
};

}  // namespace testing_oracles
