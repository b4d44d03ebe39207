// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// Translator: N ConvNeXt blocks bottom-up, N pair-wise layer attention (PLA)
// blocks top-down in a U shape. PLA block j gates the value branch computed
// from the previous PLA output with a per-head score matching it against the
// mirrored ConvNeXt feature. Entry/exit 1x1 projections adapt the channel
// count to/from the time-concatenated encoder features.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "plasm/config.hpp"
#include "plasm/layers.hpp"
#include "plasm/tensor.hpp"

namespace plasm {

/// Head weights from raw per-head scores [B, heads]: softmax across heads,
/// rescaled by the head count so that equal scores give weight 1 per head
/// (and a single head is always weight 1).
template <typename T>
TensorT<T> pla_head_weights(const TensorT<T>& scores) {
  require(scores.ndim() == 2, "pla_head_weights: expects [B, heads]");
  return scale(softmax(scores, 1), static_cast<double>(scores.dim(1)));
}

template <typename T>
struct PlaBlockT {
  Conv2dT<T> query_proj;  // 1x1 on pooled features
  Conv2dT<T> key_proj;
  TranslatorBlockT<T> value_block;
  Conv2dT<T> value_dw;  // 3x3 depthwise
  int64_t heads = 1;

  PlaBlockT() = default;
  PlaBlockT(int64_t channels, int64_t heads_, bool convnext, Rng rng) : heads(heads_) {
    Rng rq = rng.stream(0), rk = rng.stream(1), rv = rng.stream(2), rd = rng.stream(3);
    query_proj = Conv2dT<T>(channels, channels, 1, 1, 1, rq);
    key_proj = Conv2dT<T>(channels, channels, 1, 1, 1, rk);
    value_block = TranslatorBlockT<T>(channels, convnext, rv);
    value_dw = Conv2dT<T>(channels, channels, 3, 1, channels, rd);
  }

  /// Value branch on the previous PLA output.
  TensorT<T> value(const TensorT<T>& z_prev) const {
    return value_dw.forward(value_block.forward(z_prev));
  }

  /// z_conv: mirrored ConvNeXt output (query side); z_prev: previous PLA
  /// output (key/value side). Shapes [B, C, H', W'], C divisible by heads.
  TensorT<T> forward(const TensorT<T>& z_conv, const TensorT<T>& z_prev) const {
    const int64_t batch = z_conv.dim(0), ch = z_conv.dim(1);
    const int64_t h = z_conv.dim(2), w = z_conv.dim(3);
    require(ch % heads == 0, "pla_block: channels not divisible by heads");
    const int64_t cpg = ch / heads;

    auto q = reshape(query_proj.forward(global_avg_pool(z_conv)), {batch, heads, cpg});
    auto k = reshape(key_proj.forward(global_avg_pool(z_prev)), {batch, heads, cpg});
    auto scores = scale(reduce_sum(mul(q, k), {2}), 1.0 / std::sqrt(static_cast<double>(cpg)));
    auto weights = pla_head_weights(scores);  // [B, heads]

    auto v = value(z_prev);
    auto gated = mul(reshape(v, {batch, heads, cpg, h, w}), reshape(weights, {batch, heads, 1, 1, 1}));
    return reshape(gated, {batch, ch, h, w});
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    query_proj.collect(prefix + ".query_proj", out);
    key_proj.collect(prefix + ".key_proj", out);
    value_block.collect(prefix + ".value_block", out);
    value_dw.collect(prefix + ".value_dw", out);
  }
};

template <typename T>
struct TranslatorT {
  Conv2dT<T> entry;  // 1x1, T*C̃ -> Ĉ
  Conv2dT<T> exit;   // 1x1, Ĉ -> T'*C̃
  std::vector<TranslatorBlockT<T>> conv_blocks;  // N (2N when PLA is disabled)
  std::vector<PlaBlockT<T>> pla_blocks;          // N (empty when disabled)

  TranslatorT() = default;
  TranslatorT(const ModelConfig& cfg, Rng rng) {
    const int64_t ch = cfg.trans_width;
    Rng re = rng.stream(1000), rx = rng.stream(1001);
    entry = Conv2dT<T>(cfg.t_in * cfg.enc_width, ch, 1, 1, 1, re);
    exit = Conv2dT<T>(ch, cfg.t_out * cfg.enc_width, 1, 1, 1, rx);
    const int64_t n_conv = cfg.use_pla ? cfg.trans_depth : 2 * cfg.trans_depth;
    for (int64_t i = 0; i < n_conv; ++i) {
      Rng r = rng.stream(static_cast<uint64_t>(i));
      conv_blocks.emplace_back(ch, cfg.convnext_blocks, r);
    }
    if (cfg.use_pla) {
      for (int64_t i = 0; i < cfg.trans_depth; ++i) {
        Rng r = rng.stream(static_cast<uint64_t>(100 + i));
        pla_blocks.emplace_back(ch, cfg.heads, cfg.convnext_blocks, r);
      }
    }
  }

  /// s: [B, T*C̃, H', W'] -> [B, T'*C̃, H', W'].
  TensorT<T> forward(const TensorT<T>& s) const {
    TensorT<T> z = entry.forward(s);
    if (pla_blocks.empty()) {
      for (const auto& b : conv_blocks) z = b.forward(z);
      return exit.forward(z);
    }
    // Bottom-up pass keeps every stage output: PLA block j pairs with
    // ConvNeXt stage N-j+1.
    const size_t n = conv_blocks.size();
    std::vector<TensorT<T>> stages;  // stages[i] = Z_i, stages[0] = entry output
    stages.reserve(n + 1);
    stages.push_back(z);
    for (size_t i = 0; i < n; ++i) stages.push_back(conv_blocks[i].forward(stages.back()));

    TensorT<T> zbar = stages[n];  // Z̄_0 = Z_N
    for (size_t j = 1; j <= n; ++j) zbar = pla_blocks[j - 1].forward(stages[n - j + 1], zbar);
    return exit.forward(zbar);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    entry.collect(prefix + ".entry", out);
    for (size_t i = 0; i < conv_blocks.size(); ++i)
      conv_blocks[i].collect(prefix + ".conv" + std::to_string(i), out);
    for (size_t i = 0; i < pla_blocks.size(); ++i)
      pla_blocks[i].collect(prefix + ".pla" + std::to_string(i), out);
    exit.collect(prefix + ".exit", out);
  }
};

}  // namespace plasm
