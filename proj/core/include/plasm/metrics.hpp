// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// Frame-quality metrics. Conventions: pixels in [0,1]; MSE/MAE are the mean
// over batch and frames of the sum over channels/height/width; SSIM uses an
// 11x11 Gaussian window (sigma 1.5, K1=0.01, K2=0.03, dynamic range 1) on
// the valid region; PSNR is 10*log10(1/mse) on the global per-pixel MSE.

#pragma once

#include <cstdint>
#include <vector>

#include "plasm/common.hpp"

namespace plasm::metrics {

struct FrameMetrics {
  double mse = 0.0;      // sum over C,H,W, mean over batch
  double mae = 0.0;
  double ssim = 0.0;
  double psnr_db = 0.0;  // from this frame's per-pixel MSE
};

struct MetricReport {
  double mse = 0.0;
  double mae = 0.0;
  double ssim = 0.0;
  double psnr_db = 0.0;                 // +inf when the inputs are identical
  std::vector<FrameMetrics> per_frame;  // one entry per timestep
};

/// SSIM of one frame; multi-channel frames average the per-channel values.
/// Throws ConfigError when the frame is smaller than the 11x11 window.
double ssim_frame(const float* a, const float* b, int64_t channels, int64_t height, int64_t width);

double psnr_from_mse(double per_pixel_mse);

/// Full report over [B, T, C, H, W] float buffers.
MetricReport evaluate(const std::vector<float>& pred, const std::vector<float>& gt,
                      int64_t batch, int64_t frames, int64_t channels, int64_t height,
                      int64_t width);

/// Line-oriented serialization: header comment + one metric<TAB>value line.
std::string report_text(const MetricReport& report);

namespace reference {
/// Direct per-pixel SSIM with explicit window loops; the independent oracle
/// the fast implementation is checked against.
double ssim_frame(const float* a, const float* b, int64_t channels, int64_t height, int64_t width);
}  // namespace reference

}  // namespace plasm::metrics
