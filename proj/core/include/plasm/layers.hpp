// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// Parameterized layers: 2-d convolution (grouped / depthwise), transposed
// convolution, group normalization, global average pooling, masking-aware
// sparse convolution, and the ConvNeXt-style residual block.

#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "plasm/common.hpp"
#include "plasm/rng.hpp"
#include "plasm/tensor.hpp"

namespace plasm {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, TensorT<T>>>;

enum class FanMode { fan_in, fan_out };

/// Normal(0, sqrt(2/fan)) initialization for weight tensors of rank >= 2.
template <typename T>
TensorT<T> kaiming_init(Shape shape, FanMode mode, Rng& rng) {
  require(shape.size() >= 2, "kaiming_init: weight tensors have rank >= 2");
  const int64_t n = numel(shape);
  const int64_t fan = mode == FanMode::fan_in ? n / shape[0] : n / shape[1];
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan));
  auto t = randn<T>(std::move(shape), rng, stddev);
  t.set_requires_grad(true);
  return t;
}

// ---------------------------------------------------------------------------
// im2col plumbing shared by the convolution kernels
// ---------------------------------------------------------------------------

namespace detail {

// col[(c,ky,kx), (oy,ox)] = img[c, oy*stride-pad+ky, ox*stride-pad+kx] (0 outside).
template <typename T>
void im2col(const T* img, int64_t channels, int64_t h, int64_t w,
            int64_t kh, int64_t kw, int64_t stride, int64_t pad,
            int64_t grid_h, int64_t grid_w, T* col) {
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t ky = 0; ky < kh; ++ky) {
      for (int64_t kx = 0; kx < kw; ++kx) {
        T* row = col + ((c * kh + ky) * kw + kx) * grid_h * grid_w;
        for (int64_t oy = 0; oy < grid_h; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          T* dst = row + oy * grid_w;
          if (iy < 0 || iy >= h) {
            std::memset(dst, 0, sizeof(T) * static_cast<size_t>(grid_w));
            continue;
          }
          const T* src = img + (c * h + iy) * w;
          int64_t ox = 0;
          for (; ox < grid_w; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            if (ix >= 0) break;
            dst[ox] = T(0);
          }
          if (stride == 1) {
            const int64_t ix0 = ox - pad + kx;
            const int64_t run = std::min(grid_w - ox, w - ix0);
            if (run > 0) std::memcpy(dst + ox, src + ix0, sizeof(T) * static_cast<size_t>(run));
            ox += std::max<int64_t>(run, 0);
          } else {
            for (; ox < grid_w; ++ox) {
              const int64_t ix = ox * stride - pad + kx;
              if (ix >= w) break;
              dst[ox] = src[ix];
            }
          }
          for (; ox < grid_w; ++ox) dst[ox] = T(0);
        }
      }
    }
  }
}

// Adjoint scatter: img[c, oy*stride-pad+ky, ox*stride-pad+kx] += col[...].
template <typename T>
void col2im_accum(const T* col, int64_t channels, int64_t h, int64_t w,
                  int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                  int64_t grid_h, int64_t grid_w, T* img) {
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t ky = 0; ky < kh; ++ky) {
      for (int64_t kx = 0; kx < kw; ++kx) {
        const T* row = col + ((c * kh + ky) * kw + kx) * grid_h * grid_w;
        for (int64_t oy = 0; oy < grid_h; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst = img + (c * h + iy) * w;
          const T* src = row + oy * grid_w;
          for (int64_t ox = 0; ox < grid_w; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// convolution ops
// ---------------------------------------------------------------------------

/// Cross-correlation with bias. weight is [out_ch, in_ch/groups, kh, kw];
/// depthwise convolution is groups == in_ch == out_ch.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>& bias,
                  int64_t stride, int64_t padding, int64_t groups = 1) {
  require(x.ndim() == 4, "conv2d: input must be [B,C,H,W]");
  require(weight.ndim() == 4, "conv2d: weight must be [out,in/groups,kh,kw]");
  const int64_t batch = x.dim(0), in_ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t out_ch = weight.dim(0), in_pg = weight.dim(1);
  const int64_t kh = weight.dim(2), kw = weight.dim(3);
  require(in_ch % groups == 0 && out_ch % groups == 0,
          "conv2d: channels not divisible by groups");
  require(in_pg == in_ch / groups, "conv2d: weight shape inconsistent with groups");
  require(bias.ndim() == 1 && bias.dim(0) == out_ch, "conv2d: bias must be [out_ch]");
  const int64_t oh = detail::conv_out_dim(h, kh, stride, padding);
  const int64_t ow = detail::conv_out_dim(w, kw, stride, padding);
  require(oh >= 1 && ow >= 1, "conv2d: kernel larger than padded input");

  const int64_t out_pg = out_ch / groups;
  const int64_t f = in_pg * kh * kw;
  const int64_t ohw = oh * ow;

  std::vector<T> value(static_cast<size_t>(batch * out_ch * ohw));
  std::vector<T> col(static_cast<size_t>(f * ohw));
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t g = 0; g < groups; ++g) {
      const T* xg = x.value().data() + (b * in_ch + g * in_pg) * h * w;
      T* yg = value.data() + (b * out_ch + g * out_pg) * ohw;
      const T* cols;
      if (kh == 1 && kw == 1 && stride == 1 && padding == 0) {
        cols = xg;  // 1x1 projection: the input already is the column matrix
      } else {
        detail::im2col(xg, in_pg, h, w, kh, kw, stride, padding, oh, ow, col.data());
        cols = col.data();
      }
      detail::gemm_nn(out_pg, ohw, f, weight.value().data() + g * out_pg * f, f, cols, ohw,
                      yg, ohw, false);
    }
    for (int64_t oc = 0; oc < out_ch; ++oc) {
      const T bv = bias.value()[static_cast<size_t>(oc)];
      T* yrow = value.data() + (b * out_ch + oc) * ohw;
      for (int64_t i = 0; i < ohw; ++i) yrow[i] += bv;
    }
  }

  auto* xn = x.node();
  auto* wn = weight.node();
  auto* bn = bias.node();
  auto out = detail::make_op_node<T>(Shape{batch, out_ch, oh, ow}, std::move(value),
                                     {x, weight, bias}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    out.node()->backprop = [=]() {
      const T* g = on->grad.data();
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t b = 0; b < batch; ++b)
          for (int64_t oc = 0; oc < out_ch; ++oc) {
            const T* gr = g + (b * out_ch + oc) * ohw;
            T acc = T(0);
            for (int64_t i = 0; i < ohw; ++i) acc += gr[i];
            bn->grad[static_cast<size_t>(oc)] += acc;
          }
      }
      if (!xn->requires_grad && !wn->requires_grad) return;
      if (xn->requires_grad) xn->ensure_grad();
      if (wn->requires_grad) wn->ensure_grad();
      const bool direct_col = kh == 1 && kw == 1 && stride == 1 && padding == 0;
      std::vector<T> col(direct_col ? 0 : static_cast<size_t>(f * ohw));
      std::vector<T> colt(static_cast<size_t>(f * ohw));
      std::vector<T> wt(static_cast<size_t>(f * out_pg));
      std::vector<T> dcol(static_cast<size_t>(f * ohw));
      for (int64_t b = 0; b < batch; ++b) {
        for (int64_t gr = 0; gr < groups; ++gr) {
          const T* xg = xn->value.data() + (b * in_ch + gr * in_pg) * h * w;
          const T* gg = g + (b * out_ch + gr * out_pg) * ohw;
          const T* cols = xg;
          if (!direct_col) {
            detail::im2col(xg, in_pg, h, w, kh, kw, stride, padding, oh, ow, col.data());
            cols = col.data();
          }
          if (wn->requires_grad) {
            detail::transpose(f, ohw, cols, colt.data());
            detail::gemm_nn(out_pg, f, ohw, gg, ohw, colt.data(), f,
                            wn->grad.data() + gr * out_pg * f, f, true);
          }
          if (xn->requires_grad) {
            detail::transpose(out_pg, f, wn->value.data() + gr * out_pg * f, wt.data());
            T* dxg = xn->grad.data() + (b * in_ch + gr * in_pg) * h * w;
            if (direct_col) {
              detail::gemm_nn(f, ohw, out_pg, wt.data(), out_pg, gg, ohw, dxg, ohw, true);
            } else {
              detail::gemm_nn(f, ohw, out_pg, wt.data(), out_pg, gg, ohw, dcol.data(), ohw, false);
              detail::col2im_accum(dcol.data(), in_pg, h, w, kh, kw, stride, padding, oh, ow, dxg);
            }
          }
        }
      }
    };
  }
  detail::check_finite(out, "conv2d");
  return out;
}

/// Transposed convolution (the adjoint of conv2d for matching geometry).
/// weight is [in_ch, out_ch/groups, kh, kw]; output padding is fixed to
/// stride-1 so that stride 2 exactly doubles the spatial dims.
template <typename T>
TensorT<T> conv_transpose2d(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>& bias,
                            int64_t stride, int64_t padding, int64_t groups = 1) {
  require(x.ndim() == 4, "conv_transpose2d: input must be [B,C,H,W]");
  require(weight.ndim() == 4, "conv_transpose2d: weight must be [in,out/groups,kh,kw]");
  const int64_t batch = x.dim(0), in_ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(weight.dim(0) == in_ch, "conv_transpose2d: weight dim0 must equal input channels");
  const int64_t out_pg = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  require(in_ch % groups == 0, "conv_transpose2d: channels not divisible by groups");
  const int64_t in_pg = in_ch / groups;
  const int64_t out_ch = out_pg * groups;
  require(bias.ndim() == 1 && bias.dim(0) == out_ch, "conv_transpose2d: bias must be [out_ch]");
  const int64_t out_pad = stride - 1;
  const int64_t oh = (h - 1) * stride - 2 * padding + kh + out_pad;
  const int64_t ow = (w - 1) * stride - 2 * padding + kw + out_pad;
  require(oh >= 1 && ow >= 1, "conv_transpose2d: empty output");

  const int64_t f = out_pg * kh * kw;
  const int64_t hw = h * w;

  std::vector<T> value(static_cast<size_t>(batch * out_ch * oh * ow), T(0));
  std::vector<T> wt(static_cast<size_t>(in_pg * f));
  std::vector<T> cols(static_cast<size_t>(f * hw));
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t g = 0; g < groups; ++g) {
      detail::transpose(in_pg, f, weight.value().data() + g * in_pg * f, wt.data());
      const T* xg = x.value().data() + (b * in_ch + g * in_pg) * hw;
      detail::gemm_nn(f, hw, in_pg, wt.data(), in_pg, xg, hw, cols.data(), hw, false);
      T* yg = value.data() + (b * out_ch + g * out_pg) * oh * ow;
      detail::col2im_accum(cols.data(), out_pg, oh, ow, kh, kw, stride, padding, h, w, yg);
    }
    for (int64_t oc = 0; oc < out_ch; ++oc) {
      const T bv = bias.value()[static_cast<size_t>(oc)];
      T* yrow = value.data() + (b * out_ch + oc) * oh * ow;
      for (int64_t i = 0; i < oh * ow; ++i) yrow[i] += bv;
    }
  }

  auto* xn = x.node();
  auto* wn = weight.node();
  auto* bn = bias.node();
  auto out = detail::make_op_node<T>(Shape{batch, out_ch, oh, ow}, std::move(value),
                                     {x, weight, bias}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    out.node()->backprop = [=]() {
      const T* g = on->grad.data();
      const int64_t ohw = oh * ow;
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t b = 0; b < batch; ++b)
          for (int64_t oc = 0; oc < out_ch; ++oc) {
            const T* gr = g + (b * out_ch + oc) * ohw;
            T acc = T(0);
            for (int64_t i = 0; i < ohw; ++i) acc += gr[i];
            bn->grad[static_cast<size_t>(oc)] += acc;
          }
      }
      if (!xn->requires_grad && !wn->requires_grad) return;
      if (xn->requires_grad) xn->ensure_grad();
      if (wn->requires_grad) wn->ensure_grad();
      std::vector<T> colg(static_cast<size_t>(f * hw));
      std::vector<T> colgt(static_cast<size_t>(f * hw));
      for (int64_t b = 0; b < batch; ++b) {
        for (int64_t gr = 0; gr < groups; ++gr) {
          const T* gg = g + (b * out_ch + gr * out_pg) * ohw;
          detail::im2col(gg, out_pg, oh, ow, kh, kw, stride, padding, h, w, colg.data());
          if (xn->requires_grad) {
            detail::gemm_nn(in_pg, hw, f, wn->value.data() + gr * in_pg * f, f, colg.data(), hw,
                            xn->grad.data() + (b * in_ch + gr * in_pg) * hw, hw, true);
          }
          if (wn->requires_grad) {
            detail::transpose(f, hw, colg.data(), colgt.data());
            detail::gemm_nn(in_pg, f, hw, xn->value.data() + (b * in_ch + gr * in_pg) * hw, hw,
                            colgt.data(), f, wn->grad.data() + gr * in_pg * f, f, true);
          }
        }
      }
    };
  }
  detail::check_finite(out, "conv_transpose2d");
  return out;
}

// ---------------------------------------------------------------------------
// group normalization
// ---------------------------------------------------------------------------

/// Per (sample, group) normalization over channels-in-group x H x W, then
/// per-channel affine. eps is fixed at 1e-5.
template <typename T>
TensorT<T> group_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      int64_t groups, double eps = 1e-5) {
  require(x.ndim() == 4, "group_norm: input must be [B,C,H,W]");
  const int64_t batch = x.dim(0), ch = x.dim(1), hw = x.dim(2) * x.dim(3);
  require(ch % groups == 0, "group_norm: channels not divisible by groups");
  require(gamma.numel() == ch && beta.numel() == ch, "group_norm: affine params must be [C]");
  const int64_t cpg = ch / groups;
  const int64_t n = cpg * hw;

  std::vector<T> value(x.value().size());
  auto stats = std::make_shared<std::vector<T>>(static_cast<size_t>(batch * groups * 2));
  const T* in = x.value().data();
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t g = 0; g < groups; ++g) {
      const T* xg = in + (b * ch + g * cpg) * hw;
      T mean = T(0);
      for (int64_t i = 0; i < n; ++i) mean += xg[i];
      mean /= static_cast<T>(n);
      T var = T(0);
      for (int64_t i = 0; i < n; ++i) {
        const T d = xg[i] - mean;
        var += d * d;
      }
      var /= static_cast<T>(n);
      const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
      (*stats)[static_cast<size_t>((b * groups + g) * 2)] = mean;
      (*stats)[static_cast<size_t>((b * groups + g) * 2 + 1)] = inv;
      T* yg = value.data() + (b * ch + g * cpg) * hw;
      for (int64_t c = 0; c < cpg; ++c) {
        const T ga = gamma.value()[static_cast<size_t>(g * cpg + c)];
        const T be = beta.value()[static_cast<size_t>(g * cpg + c)];
        for (int64_t i = 0; i < hw; ++i)
          yg[c * hw + i] = (xg[c * hw + i] - mean) * inv * ga + be;
      }
    }
  }

  auto* xn = x.node();
  auto* gn = gamma.node();
  auto* bn = beta.node();
  auto out = detail::make_op_node<T>(x.shape(), std::move(value), {x, gamma, beta}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    out.node()->backprop = [=]() {
      const T* g = on->grad.data();
      if (xn->requires_grad) xn->ensure_grad();
      if (gn->requires_grad) gn->ensure_grad();
      if (bn->requires_grad) bn->ensure_grad();
      for (int64_t b = 0; b < batch; ++b) {
        for (int64_t gr = 0; gr < groups; ++gr) {
          const T mean = (*stats)[static_cast<size_t>((b * groups + gr) * 2)];
          const T inv = (*stats)[static_cast<size_t>((b * groups + gr) * 2 + 1)];
          const T* xg = xn->value.data() + (b * ch + gr * cpg) * hw;
          const T* gg = g + (b * ch + gr * cpg) * hw;
          // per-channel affine grads + the two reduction terms for dx
          T s1 = T(0), s2 = T(0);
          for (int64_t c = 0; c < cpg; ++c) {
            const T ga = gn->value[static_cast<size_t>(gr * cpg + c)];
            T dg = T(0), db = T(0);
            for (int64_t i = 0; i < hw; ++i) {
              const T xhat = (xg[c * hw + i] - mean) * inv;
              const T go = gg[c * hw + i];
              dg += go * xhat;
              db += go;
              const T dxhat = go * ga;
              s1 += dxhat;
              s2 += dxhat * xhat;
            }
            if (gn->requires_grad) gn->grad[static_cast<size_t>(gr * cpg + c)] += dg;
            if (bn->requires_grad) bn->grad[static_cast<size_t>(gr * cpg + c)] += db;
          }
          if (xn->requires_grad) {
            const T inv_n = T(1) / static_cast<T>(n);
            T* dx = xn->grad.data() + (b * ch + gr * cpg) * hw;
            for (int64_t c = 0; c < cpg; ++c) {
              const T ga = gn->value[static_cast<size_t>(gr * cpg + c)];
              for (int64_t i = 0; i < hw; ++i) {
                const T xhat = (xg[c * hw + i] - mean) * inv;
                const T dxhat = gg[c * hw + i] * ga;
                dx[c * hw + i] += inv * (dxhat - s1 * inv_n - xhat * s2 * inv_n);
              }
            }
          }
        }
      }
    };
  }
  detail::check_finite(out, "group_norm");
  return out;
}

/// Spatial mean per channel: [B,C,H,W] -> [B,C,1,1].
template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
  require(x.ndim() == 4, "global_avg_pool: input must be [B,C,H,W]");
  return reduce_mean(x, {2, 3}, /*keepdims=*/true);
}

// ---------------------------------------------------------------------------
// visibility masks and sparse convolution
// ---------------------------------------------------------------------------

/// Boolean per-pixel visibility map driving input masking and sparse
/// convolution; one plane per sample, shared across channels.
struct VisibilityMask {
  int64_t batch = 0;
  int64_t height = 0;
  int64_t width = 0;
  int level = 0;  // number of stride-2 subsamplings applied
  std::vector<uint8_t> visible;

  static VisibilityMask all_visible(int64_t batch, int64_t height, int64_t width) {
    VisibilityMask m;
    m.batch = batch;
    m.height = height;
    m.width = width;
    m.visible.assign(static_cast<size_t>(batch * height * width), 1);
    return m;
  }

  int64_t count_visible() const {
    int64_t n = 0;
    for (uint8_t v : visible) n += v;
    return n;
  }

  /// Top-left phase subsampling: out[y, x] = in[y*stride, x*stride].
  VisibilityMask subsample(int64_t stride) const {
    if (stride == 1) return *this;
    VisibilityMask out;
    out.batch = batch;
    out.height = (height - 1) / stride + 1;
    out.width = (width - 1) / stride + 1;
    out.level = level + 1;
    out.visible.resize(static_cast<size_t>(out.batch * out.height * out.width));
    for (int64_t b = 0; b < batch; ++b)
      for (int64_t y = 0; y < out.height; ++y)
        for (int64_t x = 0; x < out.width; ++x)
          out.visible[static_cast<size_t>((b * out.height + y) * out.width + x)] =
              visible[static_cast<size_t>((b * height + y * stride) * width + x * stride)];
    return out;
  }

  template <typename T>
  TensorT<T> as_tensor() const {
    std::vector<T> data(visible.size());
    for (size_t i = 0; i < visible.size(); ++i) data[i] = visible[i] ? T(1) : T(0);
    return TensorT<T>::from_data(Shape{batch, 1, height, width}, std::move(data));
  }
};

/// Submanifold-style sparse convolution: invisible input pixels contribute
/// nothing, and outputs at invisible positions are exactly zero (no bias
/// there either). With an all-visible mask this is bit-identical to conv2d
/// because it runs the same kernel on unchanged data.
template <typename T>
std::pair<TensorT<T>, VisibilityMask> sparse_conv2d(const TensorT<T>& x, const TensorT<T>& weight,
                                                    const TensorT<T>& bias, int64_t stride,
                                                    int64_t padding, int64_t groups,
                                                    const VisibilityMask& mask) {
  require(mask.batch == x.dim(0) && mask.height == x.dim(2) && mask.width == x.dim(3),
          "sparse_conv2d: mask dims do not match input");
  auto mask_in = mask.as_tensor<T>();
  VisibilityMask out_mask = mask.subsample(stride);
  auto y = conv2d(mul(x, mask_in), weight, bias, stride, padding, groups);
  return {mul(y, out_mask.as_tensor<T>()), std::move(out_mask)};
}

// ---------------------------------------------------------------------------
// layer objects
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2dT {
  TensorT<T> weight;  // [out, in/groups, k, k]
  TensorT<T> bias;    // [out]
  int64_t stride = 1;
  int64_t padding = 0;
  int64_t groups = 1;

  Conv2dT() = default;
  Conv2dT(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride_, int64_t groups_, Rng& rng)
      : stride(stride_), padding(k / 2), groups(groups_) {
    require(k % 2 == 1, "conv kernels must be odd-sized");
    require(in_ch % groups == 0 && out_ch % groups == 0, "conv channels not divisible by groups");
    weight = kaiming_init<T>({out_ch, in_ch / groups, k, k}, FanMode::fan_in, rng);
    bias = TensorT<T>::zeros({out_ch});
    bias.set_requires_grad(true);
  }

  TensorT<T> forward(const TensorT<T>& x) const {
    return conv2d(x, weight, bias, stride, padding, groups);
  }

  std::pair<TensorT<T>, VisibilityMask> forward_sparse(const TensorT<T>& x,
                                                       const VisibilityMask& mask) const {
    return sparse_conv2d(x, weight, bias, stride, padding, groups, mask);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
  }
};

template <typename T>
struct ConvTranspose2dT {
  TensorT<T> weight;  // [in, out/groups, k, k]
  TensorT<T> bias;    // [out]
  int64_t stride = 1;
  int64_t padding = 0;
  int64_t groups = 1;

  ConvTranspose2dT() = default;
  ConvTranspose2dT(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride_, Rng& rng)
      : stride(stride_), padding(k / 2) {
    require(k % 2 == 1, "conv kernels must be odd-sized");
    weight = kaiming_init<T>({in_ch, out_ch, k, k}, FanMode::fan_in, rng);
    bias = TensorT<T>::zeros({out_ch});
    bias.set_requires_grad(true);
  }

  TensorT<T> forward(const TensorT<T>& x) const {
    return conv_transpose2d(x, weight, bias, stride, padding, groups);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
  }
};

/// Group count convention: 2 when the channel count is even, else 1.
inline int64_t default_norm_groups(int64_t channels) { return channels % 2 == 0 ? 2 : 1; }

template <typename T>
struct GroupNormT {
  TensorT<T> gamma;
  TensorT<T> beta;
  int64_t groups = 1;

  GroupNormT() = default;
  explicit GroupNormT(int64_t channels, int64_t groups_ = 0) : groups(groups_) {
    if (groups == 0) groups = default_norm_groups(channels);
    require(channels % groups == 0, "group_norm: channels not divisible by groups");
    gamma = TensorT<T>::full({channels}, T(1));
    gamma.set_requires_grad(true);
    beta = TensorT<T>::zeros({channels});
    beta.set_requires_grad(true);
  }

  TensorT<T> forward(const TensorT<T>& x) const { return group_norm(x, gamma, beta, groups); }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
  }
};

/// Residual block: DWConv 7x7 -> GN -> 1x1 (C -> 4C) -> LReLU -> 1x1 (4C -> C),
/// added back onto the input.
template <typename T>
struct ConvNeXtBlockT {
  Conv2dT<T> dw;
  GroupNormT<T> norm;
  Conv2dT<T> expand;
  Conv2dT<T> contract;

  ConvNeXtBlockT() = default;
  ConvNeXtBlockT(int64_t channels, Rng& rng)
      : dw(channels, channels, 7, 1, channels, rng),
        norm(channels),
        expand(channels, 4 * channels, 1, 1, 1, rng),
        contract(4 * channels, channels, 1, 1, 1, rng) {}

  TensorT<T> forward(const TensorT<T>& x) const {
    auto branch = contract.forward(leaky_relu(expand.forward(norm.forward(dw.forward(x)))));
    return add(x, branch);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    dw.collect(prefix + ".dw", out);
    norm.collect(prefix + ".norm", out);
    expand.collect(prefix + ".expand", out);
    contract.collect(prefix + ".contract", out);
  }
};

/// Plain 7x7 conv block (ablation substitute for the ConvNeXt block).
template <typename T>
struct Conv7x7BlockT {
  Conv2dT<T> conv;
  GroupNormT<T> norm;

  Conv7x7BlockT() = default;
  Conv7x7BlockT(int64_t channels, Rng& rng) : conv(channels, channels, 7, 1, 1, rng), norm(channels) {}

  TensorT<T> forward(const TensorT<T>& x) const {
    return leaky_relu(norm.forward(conv.forward(x)));
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    conv.collect(prefix + ".conv", out);
    norm.collect(prefix + ".norm", out);
  }
};

/// Either translator block flavor, selected by configuration.
template <typename T>
struct TranslatorBlockT {
  std::variant<ConvNeXtBlockT<T>, Conv7x7BlockT<T>> block;

  TranslatorBlockT() = default;
  TranslatorBlockT(int64_t channels, bool convnext, Rng& rng) {
    if (convnext)
      block = ConvNeXtBlockT<T>(channels, rng);
    else
      block = Conv7x7BlockT<T>(channels, rng);
  }

  TensorT<T> forward(const TensorT<T>& x) const {
    return std::visit([&](const auto& b) { return b.forward(x); }, block);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    std::visit([&](const auto& b) { b.collect(prefix, out); }, block);
  }
};

}  // namespace plasm
