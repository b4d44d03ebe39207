// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// Pretraining-only spatial masking: per-frame channel attention whose
// top-scoring entries are forced to -inf before the softmax, plus the
// pixel-level masking of input frames that drives the sparse encoder.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "plasm/config.hpp"
#include "plasm/layers.hpp"
#include "plasm/tensor.hpp"

namespace plasm {

/// Number of masked attention entries for ratio r on a C x C score matrix.
inline int64_t masked_entry_count(double r, int64_t channels) {
  return static_cast<int64_t>(std::floor(r * static_cast<double>(channels * channels)));
}

/// Raw scores, the -inf-masked copy, and the mask itself for one frame's
/// C x C attention matrix. Masked positions are the `masked_count` largest
/// scores; ties at the boundary resolve in row-major index order.
template <typename T>
struct MaskedAttention {
  std::vector<T> scores;
  std::vector<T> masked_scores;
  std::vector<uint8_t> mask;
  int64_t masked_count = 0;
};

template <typename T>
MaskedAttention<T> build_masked_attention(const std::vector<T>& scores, int64_t channels, double r) {
  const int64_t total = channels * channels;
  require(static_cast<int64_t>(scores.size()) == total, "masked attention: score matrix size mismatch");
  MaskedAttention<T> out;
  out.scores = scores;
  out.masked_scores = scores;
  out.mask.assign(static_cast<size_t>(total), 0);
  out.masked_count = masked_entry_count(r, channels);
  if (out.masked_count == 0) return out;

  std::vector<int64_t> idx(static_cast<size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
    if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
      return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
    return a < b;
  });
  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (int64_t i = 0; i < out.masked_count; ++i) {
    out.mask[static_cast<size_t>(idx[static_cast<size_t>(i)])] = 1;
    out.masked_scores[static_cast<size_t>(idx[static_cast<size_t>(i)])] = neg_inf;
  }
  return out;
}

/// Zeroes exactly floor(r0*H*W) pixel positions per frame, shared across
/// channels, chosen uniformly without replacement. The per-frame positions
/// come from a stream derived from (clip, frame), so the result does not
/// depend on evaluation order.
template <typename T>
std::pair<TensorT<T>, VisibilityMask> mask_input_frames(const TensorT<T>& frames, double r0,
                                                        const Rng& rng) {
  require(frames.ndim() == 5, "mask_input_frames: expects [B,T,C,H,W]");
  require(r0 >= 0.0 && r0 <= 1.0, "mask_input_frames: ratio must be in [0,1]");
  const int64_t batch = frames.dim(0), t = frames.dim(1), ch = frames.dim(2);
  const int64_t h = frames.dim(3), w = frames.dim(4);
  const int64_t hw = h * w;
  const int64_t k = static_cast<int64_t>(std::floor(r0 * static_cast<double>(hw)));

  VisibilityMask vis = VisibilityMask::all_visible(batch * t, h, w);
  std::vector<T> data(frames.value());
  std::vector<int64_t> positions(static_cast<size_t>(hw));
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t f = 0; f < t; ++f) {
      if (k == 0) continue;
      Rng frame_rng = rng.stream(static_cast<uint64_t>(b)).stream(static_cast<uint64_t>(f));
      std::iota(positions.begin(), positions.end(), 0);
      // Partial Fisher-Yates: the first k entries are the masked pixels.
      for (int64_t i = 0; i < k; ++i) {
        const int64_t j = i + frame_rng.below(hw - i);
        std::swap(positions[static_cast<size_t>(i)], positions[static_cast<size_t>(j)]);
      }
      uint8_t* mrow = vis.visible.data() + (b * t + f) * hw;
      T* frame = data.data() + ((b * t + f) * ch) * hw;
      for (int64_t i = 0; i < k; ++i) {
        const int64_t pos = positions[static_cast<size_t>(i)];
        mrow[pos] = 0;
        for (int64_t c = 0; c < ch; ++c) frame[c * hw + pos] = T(0);
      }
    }
  }
  return {TensorT<T>::from_data(frames.shape(), std::move(data)), std::move(vis)};
}

/// The spatial masking module. Per frame: Q, K from GAP + 1x1 conv; raw
/// scores A = QK^T/sqrt(C); the top floor(r*C^2) entries are set to -inf;
/// row-wise softmax; output = softmax(A_hat) . V with V = dwconv3x3(input)
/// flattened to C x (H'W').
template <typename T>
struct SpatialMaskingT {
  Conv2dT<T> query_proj;
  Conv2dT<T> key_proj;
  Conv2dT<T> value_dw;

  SpatialMaskingT() = default;
  SpatialMaskingT(const ModelConfig& cfg, Rng rng) {
    Rng rq = rng.stream(0), rk = rng.stream(1), rv = rng.stream(2);
    query_proj = Conv2dT<T>(cfg.enc_width, cfg.enc_width, 1, 1, 1, rq);
    key_proj = Conv2dT<T>(cfg.enc_width, cfg.enc_width, 1, 1, 1, rk);
    value_dw = Conv2dT<T>(cfg.enc_width, cfg.enc_width, 3, 1, cfg.enc_width, rv);
  }

  /// s_hat: per-frame features [(B*T), C̃, H', W'] -> same shape.
  TensorT<T> forward(const TensorT<T>& s_hat, double r) const {
    require(s_hat.ndim() == 4, "spatial_masking: expects [(B*T),C,H,W]");
    const int64_t frames = s_hat.dim(0), ch = s_hat.dim(1);
    const int64_t h = s_hat.dim(2), w = s_hat.dim(3);

    auto q = reshape(query_proj.forward(global_avg_pool(s_hat)), {frames, ch, 1});
    auto k = reshape(key_proj.forward(global_avg_pool(s_hat)), {frames, 1, ch});
    auto scores = scale(bmm(q, k), 1.0 / std::sqrt(static_cast<double>(ch)));  // [F, C, C]

    // Top-score selection runs on forward values; the chosen positions are
    // constants as far as the gradient is concerned.
    const int64_t per_frame = ch * ch;
    std::vector<uint8_t> mask(static_cast<size_t>(frames * per_frame), 0);
    std::vector<T> frame_scores(static_cast<size_t>(per_frame));
    for (int64_t f = 0; f < frames; ++f) {
      std::copy_n(scores.value().begin() + f * per_frame, per_frame, frame_scores.begin());
      auto ma = build_masked_attention<T>(frame_scores, ch, r);
      std::copy_n(ma.mask.begin(), per_frame, mask.begin() + f * per_frame);
    }
    auto attn = softmax(masked_fill(scores, mask, -std::numeric_limits<T>::infinity()), 2);

    auto v = reshape(value_dw.forward(s_hat), {frames, ch, h * w});
    return reshape(bmm(attn, v), {frames, ch, h, w});
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    query_proj.collect(prefix + ".query_proj", out);
    key_proj.collect(prefix + ".key_proj", out);
    value_dw.collect(prefix + ".value_dw", out);
  }
};

}  // namespace plasm
