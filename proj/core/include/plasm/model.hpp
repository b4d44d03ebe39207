// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// Assembled models and their parameter bundles. The prediction model is
// encoder -> translator -> decoder; the pretraining model swaps the
// translator for the spatial masking module, runs the encoder with sparse
// convolutions, and reconstructs the input frames.

#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "plasm/config.hpp"
#include "plasm/encoder_decoder.hpp"
#include "plasm/spatial_masking.hpp"
#include "plasm/translator.hpp"

namespace plasm {

/// Named parameter bundle: phi = encoder, psi = translator, omega = decoder,
/// sm = spatial masking (pretraining only, may be empty).
template <typename T>
struct ParameterSetT {
  NamedParams<T> phi;
  NamedParams<T> psi;
  NamedParams<T> omega;
  NamedParams<T> sm;

  NamedParams<T> all() const {
    NamedParams<T> out;
    out.reserve(phi.size() + psi.size() + omega.size() + sm.size());
    for (const auto& p : phi) out.push_back(p);
    for (const auto& p : psi) out.push_back(p);
    for (const auto& p : omega) out.push_back(p);
    for (const auto& p : sm) out.push_back(p);
    return out;
  }
};

/// Overwrites parameter values from named buffers (e.g. a loaded
/// checkpoint). Every parameter in `params` must be present with a matching
/// element count; extra entries in `values` are ignored.
template <typename T>
void load_params(NamedParams<T>& params,
                 const std::unordered_map<std::string, std::vector<float>>& values) {
  for (auto& [name, tensor] : params) {
    auto it = values.find(name);
    require(it != values.end(), "checkpoint: missing parameter " + name);
    require(it->second.size() == tensor.value().size(),
            "checkpoint: size mismatch for " + name);
    for (size_t i = 0; i < it->second.size(); ++i)
      tensor.value()[i] = static_cast<T>(it->second[i]);
  }
}

template <typename T>
struct PredictionModelT {
  ModelConfig cfg;
  EncoderT<T> encoder;
  TranslatorT<T> translator;
  DecoderT<T> decoder;

  PredictionModelT() = default;
  PredictionModelT(const ModelConfig& cfg_, Rng rng) : cfg(cfg_) {
    cfg.validate();
    Rng re = rng.stream(1), rt = rng.stream(2), rd = rng.stream(3);
    encoder = EncoderT<T>(cfg, re);
    translator = TranslatorT<T>(cfg, rt);
    decoder = DecoderT<T>(cfg, rd);
  }

  /// [B, T, C, H, W] -> [B, T', C, H, W].
  TensorT<T> forward(const TensorT<T>& frames) const {
    require(frames.ndim() == 5, "predict: expects [B,T,C,H,W]");
    require(frames.dim(1) == cfg.t_in && frames.dim(2) == cfg.channels &&
                frames.dim(3) == cfg.height && frames.dim(4) == cfg.width,
            "predict: input shape " + shape_str(frames.shape()) + " does not match config");
    const int64_t batch = frames.dim(0);
    auto s = concat_time(encoder.forward(flatten_frames(frames)), batch);
    auto feat = split_time(translator.forward(s), cfg.t_out, cfg.enc_width);
    auto pixels = decoder.forward(feat);
    return reshape(pixels, {batch, cfg.t_out, cfg.channels, cfg.height, cfg.width});
  }

  ParameterSetT<T> parameters() const {
    ParameterSetT<T> ps;
    encoder.collect("phi", ps.phi);
    translator.collect("psi", ps.psi);
    decoder.collect("omega", ps.omega);
    return ps;
  }
};

template <typename T>
struct PretrainModelT {
  ModelConfig cfg;
  bool use_sm = true;
  EncoderT<T> encoder;
  SpatialMaskingT<T> sm;
  DecoderT<T> decoder;

  PretrainModelT() = default;
  PretrainModelT(const ModelConfig& cfg_, bool use_sm_, Rng rng) : cfg(cfg_), use_sm(use_sm_) {
    cfg.validate();
    Rng re = rng.stream(1), rs = rng.stream(4), rd = rng.stream(3);
    encoder = EncoderT<T>(cfg, re);
    if (use_sm) sm = SpatialMaskingT<T>(cfg, rs);
    decoder = DecoderT<T>(cfg, rd);
  }

  /// Masked reconstruction: [B, T, C, H, W] -> [B, T, C, H, W].
  TensorT<T> forward(const TensorT<T>& frames, const Rng& mask_rng) const {
    require(frames.ndim() == 5, "pretrain: expects [B,T,C,H,W]");
    const int64_t batch = frames.dim(0), t = frames.dim(1);
    auto [masked, vis] = mask_input_frames(frames, cfg.input_mask_ratio, mask_rng);
    auto [s_hat, feat_vis] = encoder.forward_masked(flatten_frames(masked), vis);
    (void)feat_vis;
    auto s_tilde = use_sm ? sm.forward(s_hat, cfg.feature_mask_ratio) : s_hat;
    auto pixels = decoder.forward(s_tilde);
    return reshape(pixels, {batch, t, cfg.channels, cfg.height, cfg.width});
  }

  ParameterSetT<T> parameters() const {
    ParameterSetT<T> ps;
    encoder.collect("phi", ps.phi);
    decoder.collect("omega", ps.omega);
    if (use_sm) sm.collect("sm", ps.sm);
    return ps;
  }
};

}  // namespace plasm
