// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synthetic data generation, two-phase training,
// prediction, evaluation, and frame export.

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "plasm/checkpoint.hpp"
#include "plasm/dataset.hpp"
#include "plasm/metrics.hpp"
#include "plasm/run_config.hpp"
#include "plasm/training.hpp"

namespace fs = std::filesystem;
using namespace plasm;

namespace {

uint64_t env_seed_fallback() {
  if (const char* env = std::getenv("PLASM_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("PLASM_SEED is not an integer: '" + std::string(env) + "'");
    }
  }
  return 0;
}

// Shared model/run flags for pretrain and train. Each returned option is
// only applied when the user passed it, so preset/config-file values win
// otherwise.
struct ConfigFlags {
  std::string preset;
  std::string config_file;
  uint64_t seed = 0;
  double lr = 0.0;
  int64_t epochs = 0;
  int64_t batch = 0;
  std::string schedule;
  double r0 = -1.0;
  double mask_ratio = -1.0;
  int64_t heads = 0;
  int64_t enc_width = 0, trans_width = 0, enc_depth = 0, trans_depth = 0;
  int64_t height = 0, width = 0, channels = 0, t_in = 0, t_out = 0;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* schedule_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "named config: mmnist|taxibj|human36m|kitti|kth|kth40");
    cmd->add_option("--config", config_file, "key = value config file");
    seed_opt = cmd->add_option("--seed", seed, "run seed (default: $PLASM_SEED or 0)");
    lr_opt = cmd->add_option("--lr", lr, "base learning rate");
    epochs_opt = cmd->add_option("--epochs", epochs, "training epochs");
    batch_opt = cmd->add_option("--batch", batch, "batch size");
    schedule_opt = cmd->add_option("--schedule", schedule, "constant|cosine|one_cycle");
    cmd->add_option("--r0", r0, "input pixel mask ratio (pretraining)");
    cmd->add_option("--mask-ratio", mask_ratio, "feature mask ratio of the SM module");
    cmd->add_option("--heads", heads, "attention head count");
    cmd->add_option("--enc-width", enc_width, "encoder channel width");
    cmd->add_option("--trans-width", trans_width, "translator channel width");
    cmd->add_option("--enc-depth", enc_depth, "encoder/decoder block count");
    cmd->add_option("--trans-depth", trans_depth, "translator block pair count");
    cmd->add_option("--height", height, "frame height");
    cmd->add_option("--width", width, "frame width");
    cmd->add_option("--channels", channels, "frame channels");
    cmd->add_option("--t-in", t_in, "input frame count");
    cmd->add_option("--t-out", t_out, "predicted frame count");
  }

  RunConfig resolve(bool pretrain_phase) const {
    RunConfig cfg;
    if (!config_file.empty()) cfg = parse_config_file(config_file);
    if (!preset.empty()) cfg = preset_config(preset);
    if (pretrain_phase) {
      // pretraining defaults: lr 0.01, 50 epochs, constant schedule
      cfg.lr = 0.01;
      cfg.schedule = Schedule::constant;
      cfg.model.epochs = 50;
    }
    if (seed_opt && seed_opt->count())
      cfg.seed = seed;
    else
      cfg.seed = env_seed_fallback();
    if (lr_opt && lr_opt->count()) cfg.lr = lr;
    if (epochs_opt && epochs_opt->count()) cfg.model.epochs = epochs;
    if (batch_opt && batch_opt->count()) cfg.batch_size = batch;
    if (schedule_opt && schedule_opt->count()) cfg.schedule = schedule_from_string(schedule);
    if (r0 >= 0.0) cfg.model.input_mask_ratio = r0;
    if (mask_ratio >= 0.0) cfg.model.feature_mask_ratio = mask_ratio;
    if (heads > 0) cfg.model.heads = heads;
    if (enc_width > 0) cfg.model.enc_width = enc_width;
    if (trans_width > 0) cfg.model.trans_width = trans_width;
    if (enc_depth > 0) cfg.model.enc_depth = enc_depth;
    if (trans_depth > 0) cfg.model.trans_depth = trans_depth;
    if (height > 0) cfg.model.height = height;
    if (width > 0) cfg.model.width = width;
    if (channels > 0) cfg.model.channels = channels;
    if (t_in > 0) cfg.model.t_in = t_in;
    if (t_out > 0) cfg.model.t_out = t_out;
    return cfg;
  }
};

void report_phase(const TrainResult& result, const std::string& ckpt_path,
                  const std::string& log_path) {
  save_checkpoint(ckpt_path, result.checkpoint);
  if (!log_path.empty()) write_loss_log(log_path, result.loss_log);
  std::cerr << "steps: " << result.steps_run << "  final loss: " << result.final_loss
            << "  checkpoint: " << ckpt_path << "\n";
}

void write_pgm(const std::string& path, const uint8_t* pixels, int64_t h, int64_t w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  os << "P5\n" << w << " " << h << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels), h * w);
  if (!os) throw FormatError("write failed for '" + path + "'");
}

int run(int argc, char** argv) {
  CLI::App app{"video prediction toolkit: masked pretraining encoder, "
               "pair-wise layer attention translator, decoder"};
  app.require_subcommand(1);

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic bouncing-sprite dataset");
  int64_t gen_clips = 16;
  std::string gen_preset = "mmnist";
  uint64_t gen_seed = 0;
  int64_t gen_frames = 0;
  int64_t gen_sprites = 2;
  std::string gen_out;
  gen->add_option("--clips", gen_clips, "number of clips")->required();
  gen->add_option("--preset", gen_preset, "preset providing geometry and T+T'");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--frames", gen_frames, "frames per clip (default: preset T+T')");
  gen->add_option("--sprites", gen_sprites, "sprites per clip");
  gen->add_option("-o,--out", gen_out, "output .vseq path")->required();

  // ---- pretrain ----
  auto* pre = app.add_subcommand("pretrain", "masked-reconstruction pretraining");
  std::string pre_data, pre_out, pre_log;
  bool pre_no_sm = false;
  int64_t pre_max_steps = 0;
  ConfigFlags pre_flags;
  pre->add_option("--data", pre_data, "training dataset (.vseq)")->required();
  pre_flags.attach(pre);
  pre->add_flag("--no-sm", pre_no_sm, "bypass the spatial masking module");
  pre->add_option("--max-steps", pre_max_steps, "stop after N optimizer steps");
  pre->add_option("-o,--out", pre_out, "output checkpoint (.plck)")->required();
  pre->add_option("--log", pre_log, "loss log path (step\\tphase\\tlr\\tloss)");

  // ---- train ----
  auto* tr = app.add_subcommand("train", "prediction training (frozen encoder)");
  std::string tr_data, tr_out, tr_log, tr_init;
  bool tr_no_pla = false, tr_vanilla = false;
  int64_t tr_max_steps = 0;
  ConfigFlags tr_flags;
  tr->add_option("--data", tr_data, "training dataset (.vseq)")->required();
  tr->add_option("--init", tr_init, "pretrained checkpoint for encoder/decoder init");
  tr_flags.attach(tr);
  tr->add_flag("--no-pla", tr_no_pla, "replace the attention translator with a plain block stack");
  tr->add_flag("--vanilla-conv", tr_vanilla, "use 7x7 conv blocks instead of ConvNeXt blocks");
  tr->add_option("--max-steps", tr_max_steps, "stop after N optimizer steps");
  tr->add_option("-o,--out", tr_out, "output checkpoint (.plck)")->required();
  tr->add_option("--log", tr_log, "loss log path");

  // ---- predict ----
  auto* pr = app.add_subcommand("predict", "predict future frames for every clip");
  std::string pr_data, pr_ckpt, pr_out;
  int64_t pr_batch = 4;
  pr->add_option("--data", pr_data, "input dataset (.vseq)")->required();
  pr->add_option("--ckpt", pr_ckpt, "trained checkpoint (.plck)")->required();
  pr->add_option("--batch", pr_batch, "inference batch size");
  pr->add_option("-o,--out", pr_out, "output predictions (.vseq, f32)")->required();

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "compare predictions against ground truth");
  std::string ev_pred, ev_gt;
  ev->add_option("--pred", ev_pred, "predicted frames (.vseq)")->required();
  ev->add_option("--gt", ev_gt, "ground truth (.vseq); extra leading frames are skipped")
      ->required();

  // ---- export-frames ----
  auto* ex = app.add_subcommand("export-frames", "write frames as binary PGM (P5) images");
  std::string ex_data, ex_out;
  int64_t ex_clip = -1;
  ex->add_option("--data", ex_data, "dataset (.vseq)")->required();
  ex->add_option("-o,--out", ex_out, "output directory")->required();
  ex->add_option("--clip", ex_clip, "export only this clip index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    auto cfg = preset_config(gen_preset);
    const uint64_t seed = gen_seed_opt->count() ? gen_seed : env_seed_fallback();
    const int64_t frames = gen_frames > 0 ? gen_frames : cfg.model.t_in + cfg.model.t_out;
    auto ds = gen_moving_shapes(gen_clips, frames, cfg.model.height, cfg.model.width, gen_sprites,
                                Rng(seed));
    save_dataset(gen_out, ds);
    std::cerr << "wrote " << gen_clips << " clips x " << frames << " frames ("
              << cfg.model.height << "x" << cfg.model.width << ") to " << gen_out << "\n";
    return 0;
  }

  if (pre->parsed()) {
    auto cfg = pre_flags.resolve(/*pretrain_phase=*/true);
    auto ds = load_dataset(pre_data);
    TrainOptions opts;
    opts.use_sm = !pre_no_sm;
    opts.max_steps = pre_max_steps;
    report_phase(pretrain(ds, cfg, opts), pre_out, pre_log);
    return 0;
  }

  if (tr->parsed()) {
    auto cfg = tr_flags.resolve(/*pretrain_phase=*/false);
    if (tr_no_pla) cfg.model.use_pla = false;
    if (tr_vanilla) cfg.model.convnext_blocks = false;
    auto ds = load_dataset(tr_data);
    TrainOptions opts;
    opts.max_steps = tr_max_steps;
    if (tr_init.empty()) {
      report_phase(train(ds, cfg, nullptr, opts), tr_out, tr_log);
    } else {
      auto init = load_checkpoint(tr_init);
      report_phase(train(ds, cfg, &init, opts), tr_out, tr_log);
    }
    return 0;
  }

  if (pr->parsed()) {
    auto ckpt = load_checkpoint(pr_ckpt);
    auto ds = load_dataset(pr_data);
    auto pred = predict_dataset(ds, ckpt, pr_batch);
    save_dataset(pr_out, pred);
    std::cerr << "wrote predictions for " << pred.n_clips << " clips to " << pr_out << "\n";
    return 0;
  }

  if (ev->parsed()) {
    auto pred = load_dataset(ev_pred);
    auto gt = load_dataset(ev_gt);
    require(pred.n_clips == gt.n_clips && pred.channels == gt.channels &&
                pred.height == gt.height && pred.width == gt.width,
            "eval: prediction and ground truth dims differ");
    require(gt.t_total >= pred.t_total, "eval: ground truth has fewer frames than predictions");
    auto pf = pred.as_f32();
    auto gf = gt.as_f32();
    if (gt.t_total > pred.t_total) {
      // align to the target segment: the last pred.t_total frames per clip
      const int64_t fe = gt.frame_elems();
      std::vector<float> tail(static_cast<size_t>(gt.n_clips * pred.t_total * fe));
      for (int64_t c = 0; c < gt.n_clips; ++c)
        std::copy_n(gf.data() + (c * gt.t_total + (gt.t_total - pred.t_total)) * fe,
                    pred.t_total * fe, tail.data() + c * pred.t_total * fe);
      gf = std::move(tail);
    }
    auto report = metrics::evaluate(pf, gf, pred.n_clips, pred.t_total, pred.channels,
                                    pred.height, pred.width);
    std::cout << metrics::report_text(report);
    return 0;
  }

  if (ex->parsed()) {
    auto ds = load_dataset(ex_data);
    fs::create_directories(ex_out);
    auto f32 = ds.as_f32();
    const int64_t hw = ds.height * ds.width;
    std::vector<uint8_t> plane(static_cast<size_t>(hw));
    const int64_t c_begin = ex_clip >= 0 ? ex_clip : 0;
    const int64_t c_end = ex_clip >= 0 ? ex_clip + 1 : ds.n_clips;
    require(c_begin >= 0 && c_end <= ds.n_clips, "export-frames: clip index out of range");
    for (int64_t c = c_begin; c < c_end; ++c)
      for (int64_t t = 0; t < ds.t_total; ++t)
        for (int64_t ch = 0; ch < ds.channels; ++ch) {
          const float* src = f32.data() + ((c * ds.t_total + t) * ds.channels + ch) * hw;
          for (int64_t i = 0; i < hw; ++i) {
            const float v = std::min(1.0f, std::max(0.0f, src[i]));
            plane[static_cast<size_t>(i)] = static_cast<uint8_t>(std::lround(v * 255.0f));
          }
          char name[64];
          std::snprintf(name, sizeof(name), "clip%04lld_t%02lld_c%lld.pgm",
                        static_cast<long long>(c), static_cast<long long>(t),
                        static_cast<long long>(ch));
          write_pgm((fs::path(ex_out) / name).string(), plane.data(), ds.height, ds.width);
        }
    std::cerr << "exported frames to " << ex_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
