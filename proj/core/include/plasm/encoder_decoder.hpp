// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// Encoder: M blocks of [conv3x3 -> GN -> LReLU] applied per frame, stride 2
// at every second block, outputs concatenated along time. Decoder mirrors it
// with transposed convolutions and a final 1x1 projection back to pixels.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "plasm/config.hpp"
#include "plasm/layers.hpp"
#include "plasm/tensor.hpp"

namespace plasm {

/// Stride schedule (1,2,1,2,...): stride 2 at the 2nd, 4th, ... block.
inline std::vector<int64_t> encoder_strides(int64_t depth) {
  std::vector<int64_t> s(static_cast<size_t>(depth), 1);
  for (int64_t i = 1; i < depth; i += 2) s[static_cast<size_t>(i)] = 2;
  return s;
}

template <typename T>
struct EncoderT {
  struct Block {
    Conv2dT<T> conv;
    GroupNormT<T> norm;
  };
  std::vector<Block> blocks;

  EncoderT() = default;
  EncoderT(const ModelConfig& cfg, Rng rng) {
    const auto strides = encoder_strides(cfg.enc_depth);
    int64_t in_ch = cfg.channels;
    for (int64_t i = 0; i < cfg.enc_depth; ++i) {
      Rng r = rng.stream(static_cast<uint64_t>(i));
      Block b;
      b.conv = Conv2dT<T>(in_ch, cfg.enc_width, 3, strides[static_cast<size_t>(i)], 1, r);
      b.norm = GroupNormT<T>(cfg.enc_width);
      blocks.push_back(std::move(b));
      in_ch = cfg.enc_width;
    }
  }

  /// frames_flat is [(B*T), C, H, W]; result is [(B*T), enc_width, H', W'].
  TensorT<T> forward(const TensorT<T>& frames_flat) const {
    TensorT<T> x = frames_flat;
    for (const auto& b : blocks) x = leaky_relu(b.norm.forward(b.conv.forward(x)));
    return x;
  }

  /// Pretraining path: every convolution is masking-aware, so occluded
  /// pixels neither contribute nor receive values.
  std::pair<TensorT<T>, VisibilityMask> forward_masked(const TensorT<T>& frames_flat,
                                                       const VisibilityMask& mask) const {
    TensorT<T> x = frames_flat;
    VisibilityMask m = mask;
    for (const auto& b : blocks) {
      auto [y, my] = b.conv.forward_sparse(x, m);
      x = leaky_relu(b.norm.forward(y));
      m = std::move(my);
    }
    return {x, m};
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    for (size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = prefix + ".block" + std::to_string(i);
      blocks[i].conv.collect(p + ".conv", out);
      blocks[i].norm.collect(p + ".norm", out);
    }
  }
};

template <typename T>
struct DecoderT {
  struct Block {
    ConvTranspose2dT<T> conv;
    GroupNormT<T> norm;
  };
  std::vector<Block> blocks;
  Conv2dT<T> to_pixels;  // final 1x1, enc_width -> C, no output nonlinearity

  DecoderT() = default;
  DecoderT(const ModelConfig& cfg, Rng rng) {
    // Mirror of the encoder: the stride list reversed, so spatial dims
    // return to (H, W) after enc_depth blocks.
    auto strides = encoder_strides(cfg.enc_depth);
    std::reverse(strides.begin(), strides.end());
    for (int64_t i = 0; i < cfg.enc_depth; ++i) {
      Rng r = rng.stream(static_cast<uint64_t>(i));
      Block b;
      b.conv = ConvTranspose2dT<T>(cfg.enc_width, cfg.enc_width, 3, strides[static_cast<size_t>(i)], r);
      b.norm = GroupNormT<T>(cfg.enc_width);
      blocks.push_back(std::move(b));
    }
    Rng r = rng.stream(static_cast<uint64_t>(cfg.enc_depth));
    to_pixels = Conv2dT<T>(cfg.enc_width, cfg.channels, 1, 1, 1, r);
  }

  /// feat_flat is [(B*T'), enc_width, H', W']; result is [(B*T'), C, H, W].
  TensorT<T> forward(const TensorT<T>& feat_flat) const {
    TensorT<T> x = feat_flat;
    for (const auto& b : blocks) x = leaky_relu(b.norm.forward(b.conv.forward(x)));
    return to_pixels.forward(x);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    for (size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = prefix + ".block" + std::to_string(i);
      blocks[i].conv.collect(p + ".conv", out);
      blocks[i].norm.collect(p + ".norm", out);
    }
    to_pixels.collect(prefix + ".to_pixels", out);
  }
};

/// [B, T, C, H, W] -> [(B*T), C, H, W]; pure reshape, the layouts coincide.
template <typename T>
TensorT<T> flatten_frames(const TensorT<T>& clips) {
  require(clips.ndim() == 5, "flatten_frames: expects [B,T,C,H,W]");
  return reshape(clips, {clips.dim(0) * clips.dim(1), clips.dim(2), clips.dim(3), clips.dim(4)});
}

/// [(B*T), C̃, H', W'] -> [B, T*C̃, H', W']; time-concatenated form.
template <typename T>
TensorT<T> concat_time(const TensorT<T>& per_frame, int64_t batch) {
  require(per_frame.ndim() == 4, "concat_time: expects [(B*T),C,H,W]");
  const int64_t t = per_frame.dim(0) / batch;
  require(t * batch == per_frame.dim(0), "concat_time: batch does not divide frame count");
  return reshape(per_frame, {batch, t * per_frame.dim(1), per_frame.dim(2), per_frame.dim(3)});
}

/// Inverse of concat_time: [B, T*C̃, H', W'] -> [(B*T), C̃, H', W'].
template <typename T>
TensorT<T> split_time(const TensorT<T>& concat, int64_t t, int64_t channels) {
  require(concat.ndim() == 4, "split_time: expects [B,T*C,H,W]");
  require(concat.dim(1) == t * channels, "split_time: channel dim does not factor as T*C");
  return reshape(concat, {concat.dim(0) * t, channels, concat.dim(2), concat.dim(3)});
}

}  // namespace plasm
