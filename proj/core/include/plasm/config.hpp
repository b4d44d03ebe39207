// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "plasm/common.hpp"

namespace plasm {

/// Architecture hyper-parameters shared by every component.
///
/// enc_width is the encoder channel width, trans_width the translator width,
/// enc_depth the number of encoder/decoder blocks, trans_depth the number of
/// block pairs in the translator. input_mask_ratio masks input pixels during
/// pretraining; feature_mask_ratio masks attention scores in the spatial
/// masking module.
struct ModelConfig {
  int64_t height = 64;
  int64_t width = 64;
  int64_t channels = 1;
  int64_t t_in = 10;
  int64_t t_out = 10;
  int64_t enc_width = 64;
  int64_t trans_width = 512;
  int64_t enc_depth = 4;
  int64_t trans_depth = 4;
  int64_t heads = 2;
  double input_mask_ratio = 0.96;
  double feature_mask_ratio = 0.1;
  int64_t epochs = 2000;
  bool use_pla = true;         // pair-wise layer attention vs plain block stack
  bool convnext_blocks = true; // ConvNeXt blocks vs vanilla 7x7 conv blocks

  /// Spatial reduction applied by the encoder: one halving per stride-2 block.
  int64_t downscale() const { return int64_t(1) << (enc_depth / 2); }
  int64_t feat_height() const { return height / downscale(); }
  int64_t feat_width() const { return width / downscale(); }

  void validate() const {
    require(height >= 1 && width >= 1 && channels >= 1, "config: frame dims must be positive");
    require(t_in >= 1 && t_out >= 1, "config: frame counts must be positive");
    require(enc_width >= 1 && trans_width >= 1, "config: channel widths must be positive");
    require(enc_depth >= 1 && trans_depth >= 1, "config: depths must be positive");
    require(heads >= 1, "config: head count must be positive");
    require(height % downscale() == 0 && width % downscale() == 0,
            "config: frame dims must be divisible by " + std::to_string(downscale()));
    require(trans_width % heads == 0,
            "config: translator width must be divisible by the head count");
    require(trans_width % 2 == 0, "config: translator width must be even");
    require(input_mask_ratio >= 0.0 && input_mask_ratio <= 1.0,
            "config: input mask ratio must be in [0,1]");
    require(feature_mask_ratio >= 0.0 && feature_mask_ratio <= 1.0,
            "config: feature mask ratio must be in [0,1]");
    require(epochs >= 1, "config: epochs must be positive");
  }
};

}  // namespace plasm
