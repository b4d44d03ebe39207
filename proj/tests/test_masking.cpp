// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "plasm/model.hpp"
#include "plasm/spatial_masking.hpp"
#include "support/gradcheck.hpp"

using namespace plasm;
using plasm::testing::grad_check;
using plasm::testing::probe_weights;
using plasm::testing::weighted_sum;

namespace {
const double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("masked entry counts") {
  CHECK(masked_entry_count(0.1, 64) == 409);
  CHECK(masked_entry_count(0.1, 32) == 102);
  CHECK(masked_entry_count(0.05, 16) == 12);
  CHECK(masked_entry_count(0.25, 4) == 4);  // exact integer case
  CHECK(masked_entry_count(0.0, 64) == 0);
  CHECK(masked_entry_count(1.0, 8) == 64);
}

TEST_CASE("masked attention selects the largest scores") {
  Rng rng(1);
  const int64_t c = 8;
  std::vector<double> scores(static_cast<size_t>(c * c));
  for (auto& v : scores) v = rng.uniform(-1.0, 1.0);
  auto ma = build_masked_attention<double>(scores, c, 0.25);
  CHECK(ma.masked_count == 16);

  // every masked score >= every unmasked score
  double min_masked = kInf, max_unmasked = -kInf;
  int64_t masked_seen = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (ma.mask[i]) {
      min_masked = std::min(min_masked, scores[i]);
      CHECK(ma.masked_scores[i] == -kInf);
      ++masked_seen;
    } else {
      max_unmasked = std::max(max_unmasked, scores[i]);
      CHECK(ma.masked_scores[i] == scores[i]);
    }
  }
  CHECK(masked_seen == 16);
  CHECK(min_masked >= max_unmasked);
}

TEST_CASE("mask positions are invariant under adding a constant") {
  Rng rng(2);
  const int64_t c = 16;
  std::vector<double> scores(static_cast<size_t>(c * c));
  for (auto& v : scores) v = rng.uniform(-3.0, 3.0);
  auto base = build_masked_attention<double>(scores, c, 0.1);
  for (auto& v : scores) v += 17.25;
  auto shifted = build_masked_attention<double>(scores, c, 0.1);
  CHECK(base.mask == shifted.mask);
}

TEST_CASE("ties at the boundary resolve in row-major order") {
  const int64_t c = 4;
  std::vector<double> zeros(16, 0.0);
  auto ma = build_masked_attention<double>(zeros, c, 0.5);  // 8 of 16
  for (size_t i = 0; i < 16; ++i) CHECK(ma.mask[i] == (i < 8 ? 1 : 0));
}

TEST_CASE("row-wise softmax zeroes exactly the masked entries") {
  Rng rng(3);
  const int64_t c = 64;
  auto scores = rand_uniform<double>({1, c, c}, rng, -1.0, 1.0);
  std::vector<double> frame(scores.value());
  auto ma = build_masked_attention<double>(frame, c, 0.1);
  CHECK(ma.masked_count == 409);

  auto attn = softmax(masked_fill(scores, ma.mask, -kInf), 2);
  int64_t zeros = 0;
  for (int64_t row = 0; row < c; ++row) {
    double sum = 0.0;
    bool full_row_masked = true;
    for (int64_t col = 0; col < c; ++col) {
      const double v = attn.value()[static_cast<size_t>(row * c + col)];
      if (ma.mask[static_cast<size_t>(row * c + col)]) {
        CHECK(v == 0.0);
        ++zeros;
      } else {
        full_row_masked = false;
        CHECK(v > 0.0);
      }
      sum += v;
    }
    if (!full_row_masked) CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(zeros == 409);
}

TEST_CASE("a fully masked row yields zeros, never NaN") {
  const int64_t c = 4;
  auto scores = TensorT<double>::zeros({1, c, c});
  std::vector<uint8_t> mask(16, 0);
  for (int64_t col = 0; col < c; ++col) mask[static_cast<size_t>(col)] = 1;  // row 0
  auto attn = softmax(masked_fill(scores, mask, -kInf), 2);
  for (int64_t col = 0; col < c; ++col) CHECK(attn.value()[static_cast<size_t>(col)] == 0.0);
  for (double v : attn.value()) CHECK(std::isfinite(v));
}

TEST_CASE("mask_input_frames") {
  Rng rng(4);

  SUBCASE("exact masked pixel count at r0 = 0.96 on 64x64") {
    auto frames = rand_uniform<double>({1, 2, 1, 64, 64}, rng, 0.5, 1.0);
    auto [masked, vis] = mask_input_frames(frames, 0.96, Rng(7));
    CHECK(vis.count_visible() == 2 * (4096 - 3932));
    for (int64_t f = 0; f < 2; ++f) {
      int64_t zeros = 0;
      for (int64_t i = 0; i < 4096; ++i)
        if (masked.value()[static_cast<size_t>(f * 4096 + i)] == 0.0) ++zeros;
      CHECK(zeros == 3932);
    }
  }

  SUBCASE("r0 = 0 leaves frames unchanged with an all-visible mask") {
    auto frames = rand_uniform<double>({2, 3, 1, 16, 16}, rng);
    auto [masked, vis] = mask_input_frames(frames, 0.0, Rng(8));
    CHECK(masked.value() == frames.value());
    CHECK(vis.count_visible() == 6 * 256);
  }

  SUBCASE("r0 = 1 zeroes everything") {
    auto frames = rand_uniform<double>({1, 2, 2, 8, 8}, rng, 0.5, 1.0);
    auto [masked, vis] = mask_input_frames(frames, 1.0, Rng(9));
    for (double v : masked.value()) CHECK(v == 0.0);
    CHECK(vis.count_visible() == 0);
  }

  SUBCASE("masked positions are shared across channels") {
    auto frames = rand_uniform<double>({1, 1, 3, 8, 8}, rng, 0.5, 1.0);
    auto [masked, vis] = mask_input_frames(frames, 0.5, Rng(10));
    for (int64_t p = 0; p < 64; ++p) {
      const bool visible = vis.visible[static_cast<size_t>(p)] != 0;
      for (int64_t c = 0; c < 3; ++c) {
        const double v = masked.value()[static_cast<size_t>(c * 64 + p)];
        if (visible)
          CHECK(v == frames.value()[static_cast<size_t>(c * 64 + p)]);
        else
          CHECK(v == 0.0);
      }
    }
  }

  SUBCASE("same seed, same masks") {
    auto frames = rand_uniform<double>({2, 2, 1, 8, 8}, rng);
    auto [m1, v1] = mask_input_frames(frames, 0.5, Rng(11));
    auto [m2, v2] = mask_input_frames(frames, 0.5, Rng(11));
    CHECK(m1.value() == m2.value());
    CHECK(v1.visible == v2.visible);
  }
}

TEST_CASE("sm_forward with zero projections masks the first positions row-major") {
  ModelConfig cfg;
  cfg.height = 8;
  cfg.width = 8;
  cfg.channels = 1;
  cfg.t_in = 1;
  cfg.t_out = 1;
  cfg.enc_width = 64;
  cfg.trans_width = 8;
  cfg.enc_depth = 2;
  cfg.trans_depth = 1;
  cfg.heads = 2;

  Rng rng(5);
  SpatialMaskingT<double> sm(cfg, rng);
  std::fill(sm.query_proj.weight.value().begin(), sm.query_proj.weight.value().end(), 0.0);
  std::fill(sm.query_proj.bias.value().begin(), sm.query_proj.bias.value().end(), 0.0);

  Rng dr(6);
  auto s_hat = rand_uniform<double>({1, 64, 4, 4}, dr);
  auto out = sm.forward(s_hat, 0.1);
  CHECK(out.shape() == s_hat.shape());

  // Q = 0 makes all scores零: the first 409 entries in row-major order are
  // masked, i.e. rows 0..5 fully (384) plus 25 entries of row 6. Fully
  // masked rows produce all-zero output channels.
  for (int64_t c = 0; c < 6; ++c)
    for (int64_t i = 0; i < 16; ++i)
      CHECK(out.value()[static_cast<size_t>(c * 16 + i)] == 0.0);

  // rows 7..63 have uniform attention over all 64 value channels, so those
  // output channels are identical
  for (int64_t c = 8; c < 64; ++c)
    for (int64_t i = 0; i < 16; ++i)
      CHECK(out.value()[static_cast<size_t>(c * 16 + i)] ==
            doctest::Approx(out.value()[static_cast<size_t>(7 * 16 + i)]).epsilon(1e-12));

  // row 6 averages only the 39 unmasked channels, so it differs
  bool differs = false;
  for (int64_t i = 0; i < 16; ++i)
    if (std::abs(out.value()[static_cast<size_t>(6 * 16 + i)] -
                 out.value()[static_cast<size_t>(7 * 16 + i)]) > 1e-9)
      differs = true;
  CHECK(differs);
}

TEST_CASE("sm_forward with r=0 keeps every row a convex combination") {
  ModelConfig cfg;
  cfg.height = 8;
  cfg.width = 8;
  cfg.channels = 1;
  cfg.t_in = 2;
  cfg.t_out = 2;
  cfg.enc_width = 4;
  cfg.trans_width = 8;
  cfg.enc_depth = 2;
  cfg.trans_depth = 1;
  cfg.heads = 2;

  Rng rng(7);
  SpatialMaskingT<double> sm(cfg, rng);
  Rng dr(8);
  auto s_hat = rand_uniform<double>({4, 4, 4, 4}, dr, -1.0, 1.0);
  s_hat.set_requires_grad(true);
  auto w = probe_weights({4, 4, 4, 4}, 61);

  NamedParams<double> params;
  sm.collect("sm", params);
  std::vector<TensorT<double>> wrt{s_hat};
  for (auto& [n, t] : params) wrt.push_back(t);
  auto res = grad_check([&]() { return weighted_sum(sm.forward(s_hat, 0.0), w); }, wrt);
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("pretrain forward keeps the input shape and stays finite") {
  ModelConfig cfg;
  cfg.height = 16;
  cfg.width = 16;
  cfg.channels = 1;
  cfg.t_in = 2;
  cfg.t_out = 2;
  cfg.enc_width = 4;
  cfg.trans_width = 8;
  cfg.enc_depth = 2;
  cfg.trans_depth = 1;
  cfg.heads = 2;
  cfg.input_mask_ratio = 0.5;
  cfg.feature_mask_ratio = 0.1;

  Rng rng(9);
  PretrainModelT<double> model(cfg, true, rng);
  Rng dr(10);
  auto frames = rand_uniform<double>({2, 2, 1, 16, 16}, dr);
  auto recon = model.forward(frames, Rng(11));
  CHECK(recon.shape() == frames.shape());
  for (double v : recon.value()) CHECK(std::isfinite(v));

  SUBCASE("r0 = 0 and r = 0 still runs") {
    ModelConfig open = cfg;
    open.input_mask_ratio = 0.0;
    open.feature_mask_ratio = 0.0;
    PretrainModelT<double> m2(open, true, Rng(12));
    auto r2 = m2.forward(frames, Rng(13));
    for (double v : r2.value()) CHECK(std::isfinite(v));
  }

  SUBCASE("without the SM module the encoder feeds the decoder directly") {
    PretrainModelT<double> m3(cfg, false, Rng(14));
    auto r3 = m3.forward(frames, Rng(15));
    CHECK(r3.shape() == frames.shape());
    CHECK(m3.parameters().sm.empty());
  }
}
