// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-phase pipeline. Pretraining optimizes masked reconstruction through
// encoder + spatial masking + decoder; training freezes the encoder,
// initializes the translator fresh, reuses the pretrained decoder, and
// optimizes prediction error. Everything is a pure function of
// (seed, config, dataset).

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "plasm/checkpoint.hpp"
#include "plasm/dataset.hpp"
#include "plasm/model.hpp"
#include "plasm/run_config.hpp"

namespace plasm {

struct TrainOptions {
  bool use_sm = true;            // pretraining: include the spatial masking module
  int64_t max_steps = 0;         // 0 = run the configured epochs to the end
  double stop_below_loss = 0.0;  // > 0: stop once the step loss drops below
  std::ostream* live_log = nullptr;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<std::string> loss_log;     // "step\tphase\tlr\tloss" per step
  std::vector<double> epoch_mean_loss;
  double final_loss = 0.0;
  int64_t steps_run = 0;
};

/// Masked-reconstruction pretraining; returns encoder/decoder/SM parameters.
TrainResult pretrain(const VideoDataset& ds, const RunConfig& cfg, const TrainOptions& opts = {});

/// Prediction training. With `init`, encoder and decoder start from the
/// checkpoint (the encoder is frozen either way); the translator is always
/// freshly initialized.
TrainResult train(const VideoDataset& ds, const RunConfig& cfg, const Checkpoint* init,
                  const TrainOptions& opts = {});

/// Rebuilds the model a checkpoint was trained with (from its config echo)
/// and loads the weights. Requires a trained-phase checkpoint.
PredictionModelT<float> model_from_checkpoint(const Checkpoint& ckpt);

/// Deterministic inference: [B, T, C, H, W] -> [B, T', C, H, W], no masking.
Tensor predict(const PredictionModelT<float>& model, const Tensor& frames);

/// Runs predict over the first T frames of every clip; result is an f32
/// dataset of the T' predicted frames per clip.
VideoDataset predict_dataset(const VideoDataset& ds, const Checkpoint& ckpt,
                             int64_t batch_size = 4);

void write_loss_log(const std::string& path, const std::vector<std::string>& lines);

}  // namespace plasm
