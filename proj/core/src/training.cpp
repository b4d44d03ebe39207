// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0

#include "plasm/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "plasm/losses.hpp"
#include "plasm/optimizer.hpp"

namespace plasm {

namespace {

// Stream ids for the per-phase generators, all derived from the run seed.
constexpr uint64_t kModelStream = 1;
constexpr uint64_t kShuffleStream = 2;
constexpr uint64_t kMaskStream = 3;

std::string log_line(int64_t step, const char* phase, double lr, double loss) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%lld\t%s\t%.8g\t%.8g", static_cast<long long>(step), phase, lr,
                loss);
  return buf;
}

void append_params(Checkpoint& ckpt, const NamedParams<float>& params) {
  for (const auto& [name, tensor] : params) ckpt.add(name, tensor.shape(), tensor.value());
}

struct StepOutcome {
  double loss = 0.0;
  bool stop = false;
};

template <typename ForwardFn>
StepOutcome run_step(ForwardFn&& forward, Adam& adam, const char* phase, int64_t step,
                     const TrainOptions& opts, TrainResult& result) {
  const double lr = adam.current_lr();
  Tensor loss = forward();
  const double loss_v = static_cast<double>(loss.item());
  if (!std::isfinite(loss_v))
    throw std::runtime_error(std::string("training diverged: non-finite loss at ") + phase +
                             " step " + std::to_string(step));
  result.loss_log.push_back(log_line(step, phase, lr, loss_v));
  if (opts.live_log) (*opts.live_log) << result.loss_log.back() << '\n';
  backward(loss);
  adam.step();
  adam.zero_grad();
  StepOutcome out;
  out.loss = loss_v;
  out.stop = (opts.stop_below_loss > 0.0 && loss_v < opts.stop_below_loss) ||
             (opts.max_steps > 0 && step + 1 >= opts.max_steps);
  return out;
}

}  // namespace

TrainResult pretrain(const VideoDataset& ds, const RunConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  require(ds.n_clips >= 1, "pretrain: empty dataset");
  require(ds.t_total >= cfg.model.t_in, "pretrain: clips shorter than the input segment");

  Rng base(cfg.seed);
  PretrainModelT<float> model(cfg.model, opts.use_sm, base.stream(kModelStream));
  auto params = model.parameters();

  const int64_t n_batches = ds.n_clips / cfg.batch_size;
  require(n_batches >= 1, "pretrain: dataset smaller than one batch");
  OptimizerConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.schedule = cfg.schedule;
  opt_cfg.total_steps = cfg.model.epochs * n_batches;
  Adam adam(params.all(), opt_cfg);

  TrainResult result;
  int64_t step = 0;
  bool stop = false;
  for (int64_t epoch = 0; epoch < cfg.model.epochs && !stop; ++epoch) {
    BatchStream batches(ds, cfg.model.t_in, 0, cfg.batch_size,
                        base.stream(kShuffleStream).stream(static_cast<uint64_t>(epoch)));
    Tensor input, target;
    double epoch_loss = 0.0;
    int64_t epoch_batches = 0;
    while (!stop && batches.next(input, target)) {
      Rng mask_rng = base.stream(kMaskStream).stream(static_cast<uint64_t>(step));
      auto outcome = run_step(
          [&]() {
            auto recon = model.forward(input, mask_rng);
            return loss_reconstruction(input, recon);
          },
          adam, "pretrain", step, opts, result);
      epoch_loss += outcome.loss;
      result.final_loss = outcome.loss;
      stop = outcome.stop;
      ++step;
      ++epoch_batches;
    }
    if (epoch_batches > 0)
      result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(epoch_batches));
  }
  result.steps_run = step;

  result.checkpoint.phase = Checkpoint::Phase::pretrained;
  append_params(result.checkpoint, params.all());
  append_params(result.checkpoint, adam.named_state());
  result.checkpoint.config_echo = serialize_config(cfg);
  return result;
}

TrainResult train(const VideoDataset& ds, const RunConfig& cfg, const Checkpoint* init,
                  const TrainOptions& opts) {
  cfg.validate();
  require(ds.n_clips >= 1, "train: empty dataset");
  require(ds.t_total >= cfg.model.t_in + cfg.model.t_out,
          "train: clips shorter than input+target segments");

  Rng base(cfg.seed);
  PredictionModelT<float> model(cfg.model, base.stream(kModelStream));
  auto params = model.parameters();
  if (init) {
    const auto values = init->to_map();
    load_params(params.phi, values);
    load_params(params.omega, values);
  }
  for (auto& [name, tensor] : params.phi) tensor.set_requires_grad(false);  // frozen

  NamedParams<float> trainable;
  for (const auto& p : params.psi) trainable.push_back(p);
  for (const auto& p : params.omega) trainable.push_back(p);

  const int64_t n_batches = ds.n_clips / cfg.batch_size;
  require(n_batches >= 1, "train: dataset smaller than one batch");
  OptimizerConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.schedule = cfg.schedule;
  opt_cfg.total_steps = cfg.model.epochs * n_batches;
  Adam adam(trainable, opt_cfg);

  TrainResult result;
  int64_t step = 0;
  bool stop = false;
  for (int64_t epoch = 0; epoch < cfg.model.epochs && !stop; ++epoch) {
    BatchStream batches(ds, cfg.model.t_in, cfg.model.t_out, cfg.batch_size,
                        base.stream(kShuffleStream).stream(static_cast<uint64_t>(epoch)));
    Tensor input, target;
    double epoch_loss = 0.0;
    int64_t epoch_batches = 0;
    while (!stop && batches.next(input, target)) {
      auto outcome = run_step(
          [&]() {
            auto pred = model.forward(input);
            return loss_prediction(target, pred);
          },
          adam, "train", step, opts, result);
      epoch_loss += outcome.loss;
      result.final_loss = outcome.loss;
      stop = outcome.stop;
      ++step;
      ++epoch_batches;
    }
    if (epoch_batches > 0)
      result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(epoch_batches));
  }
  result.steps_run = step;

  result.checkpoint.phase = Checkpoint::Phase::trained;
  append_params(result.checkpoint, params.all());
  append_params(result.checkpoint, adam.named_state());
  result.checkpoint.config_echo = serialize_config(cfg);
  return result;
}

PredictionModelT<float> model_from_checkpoint(const Checkpoint& ckpt) {
  require(ckpt.phase == Checkpoint::Phase::trained,
          "predict: checkpoint is not from the training phase");
  RunConfig cfg = parse_config_text(ckpt.config_echo);
  PredictionModelT<float> model(cfg.model, Rng(cfg.seed).stream(kModelStream));
  auto params = model.parameters();
  const auto values = ckpt.to_map();
  load_params(params.phi, values);
  load_params(params.psi, values);
  load_params(params.omega, values);
  return model;
}

Tensor predict(const PredictionModelT<float>& model, const Tensor& frames) {
  NoGradGuard inference;
  return model.forward(frames);
}

VideoDataset predict_dataset(const VideoDataset& ds, const Checkpoint& ckpt, int64_t batch_size) {
  auto model = model_from_checkpoint(ckpt);
  const ModelConfig& mc = model.cfg;
  require(ds.channels == mc.channels && ds.height == mc.height && ds.width == mc.width,
          "predict: dataset frame dims do not match the checkpoint config");
  require(ds.t_total >= mc.t_in, "predict: clips shorter than the input segment");

  VideoDataset out;
  out.n_clips = ds.n_clips;
  out.t_total = mc.t_out;
  out.channels = mc.channels;
  out.height = mc.height;
  out.width = mc.width;
  out.dtype = VideoDataset::Pixel::f32;
  out.data_f32.resize(static_cast<size_t>(out.total_elems()));

  const int64_t fe = ds.frame_elems();
  std::vector<float> clip(static_cast<size_t>(ds.clip_elems()));
  for (int64_t c0 = 0; c0 < ds.n_clips; c0 += batch_size) {
    const int64_t b = std::min(batch_size, ds.n_clips - c0);
    std::vector<float> in(static_cast<size_t>(b * mc.t_in * fe));
    for (int64_t i = 0; i < b; ++i) {
      ds.copy_clip_f32(c0 + i, clip.data());
      std::copy_n(clip.data(), mc.t_in * fe, in.data() + i * mc.t_in * fe);
    }
    auto pred = predict(model, Tensor::from_data({b, mc.t_in, mc.channels, mc.height, mc.width},
                                                 std::move(in)));
    std::copy_n(pred.value().data(), b * mc.t_out * fe, out.data_f32.data() + c0 * mc.t_out * fe);
  }
  return out;
}

void write_loss_log(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream os(path, std::ios::binary);  // binary: byte-identical logs across runs
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  for (const auto& line : lines) os << line << '\n';
  if (!os) throw FormatError("write failed for '" + path + "'");
}

}  // namespace plasm
