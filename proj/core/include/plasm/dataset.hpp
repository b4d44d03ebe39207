// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// Clip-major video container with a binary on-disk format (VSEQ), a
// synthetic bouncing-sprite clip generator, and deterministic batching.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "plasm/common.hpp"
#include "plasm/rng.hpp"
#include "plasm/tensor.hpp"

namespace plasm {

/// Clip-major pixel container. Payload order is clip, frame, channel, row,
/// column; u8 pixels span [0,255], f32 pixels span [0,1].
struct VideoDataset {
  enum class Pixel : uint8_t { u8 = 0, f32 = 1 };

  int64_t n_clips = 0;
  int64_t t_total = 0;
  int64_t channels = 0;
  int64_t height = 0;
  int64_t width = 0;
  Pixel dtype = Pixel::u8;
  std::vector<uint8_t> data_u8;
  std::vector<float> data_f32;

  int64_t frame_elems() const { return channels * height * width; }
  int64_t clip_elems() const { return t_total * frame_elems(); }
  int64_t total_elems() const { return n_clips * clip_elems(); }

  /// Pixels of one clip as floats in [0,1].
  void copy_clip_f32(int64_t clip, float* dst) const;

  /// Whole dataset as floats in [0,1] (metrics / evaluation path).
  std::vector<float> as_f32() const;
};

/// One axis of bouncing motion: advance by vel, reflecting off 0 and `max`.
std::pair<double, double> advance_position(double pos, double vel, double max);

/// Synthetic grayscale clips: n_sprites glyph stamps with uniform random
/// start and velocity (speed in [1,4] px/frame), reflecting off the frame
/// borders; frames are max-composites of the stamps.
VideoDataset gen_moving_shapes(int64_t n_clips, int64_t t_total, int64_t height, int64_t width,
                               int64_t n_sprites, Rng rng);

void save_dataset(const std::string& path, const VideoDataset& ds);
VideoDataset load_dataset(const std::string& path);

/// Seeded epoch iteration: shuffled clip order, fixed batch size with the
/// remainder dropped, u8 pixels scaled to [0,1]. Each batch yields the
/// first t_in frames as input and the next t_out frames as target.
class BatchStream {
 public:
  BatchStream(const VideoDataset& ds, int64_t t_in, int64_t t_out, int64_t batch_size, Rng rng);

  /// Fills the next (input, target) pair; returns false at epoch end.
  bool next(Tensor& input, Tensor& target);

  int64_t batches_per_epoch() const {
    return static_cast<int64_t>(order_.size()) / batch_size_;
  }

 private:
  const VideoDataset& ds_;
  int64_t t_in_;
  int64_t t_out_;
  int64_t batch_size_;
  std::vector<int64_t> order_;
  int64_t cursor_ = 0;
};

}  // namespace plasm
