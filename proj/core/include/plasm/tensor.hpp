// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense n-d tensor with reverse-mode automatic differentiation.
//
// A TensorT<T> is a shared handle to an immutable value buffer plus, for
// graph-producing operations, the parent handles and a backward closure.
// Scalar type T is float for training and double for finite-difference
// gradient checks. All kernels are sequential per output element with a
// fixed reduction order, so identical inputs give bit-identical outputs.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "plasm/common.hpp"
#include "plasm/detail/gemm.hpp"
#include "plasm/rng.hpp"

namespace plasm {

namespace detail {
// Graph recording is disabled inside a NoGradGuard scope (inference mode);
// ops then produce value-only tensors and inputs can be freed eagerly.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
class TensorT;

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // persistent on leaves, transient elsewhere
  bool requires_grad = false;
  std::vector<TensorT<T>> parents;
  std::function<void()> backprop;  // accumulates this node's grad into parents

  bool is_leaf() const { return !backprop; }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
class TensorT {
 public:
  TensorT() = default;

  static TensorT from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
    require(::plasm::numel(shape) == static_cast<int64_t>(data.size()),
            "tensor: shape " + shape_str(shape) + " does not match buffer of " +
                std::to_string(data.size()) + " elements");
    TensorT t;
    t.node_ = std::make_shared<TensorNode<T>>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static TensorT zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }

  static TensorT full(Shape shape, T fill, bool requires_grad = false) {
    std::vector<T> data(static_cast<size_t>(::plasm::numel(shape)), fill);
    return from_data(std::move(shape), std::move(data), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t ndim() const { return static_cast<int64_t>(node_->shape.size()); }
  int64_t dim(int64_t i) const { return node_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }

  const std::vector<T>& value() const { return node_->value; }
  std::vector<T>& value() { return node_->value; }
  const std::vector<T>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), T(0)); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) {
    require(node_->is_leaf(), "requires_grad can only be toggled on leaf tensors");
    node_->requires_grad = flag;
  }

  T item() const {
    require(numel() == 1, "item: tensor is not scalar, shape " + shape_str(shape()));
    return node_->value[0];
  }

  TensorNode<T>* node() const { return node_.get(); }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

using Tensor = TensorT<float>;

// ---------------------------------------------------------------------------
// construction helpers
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> randn(Shape shape, Rng& rng, double stddev = 1.0) {
  std::vector<T> data(static_cast<size_t>(numel(shape)));
  for (auto& v : data) v = static_cast<T>(rng.normal() * stddev);
  return TensorT<T>::from_data(std::move(shape), std::move(data));
}

template <typename T>
TensorT<T> rand_uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::vector<T> data(static_cast<size_t>(numel(shape)));
  for (auto& v : data) v = static_cast<T>(rng.uniform(lo, hi));
  return TensorT<T>::from_data(std::move(shape), std::move(data));
}

// ---------------------------------------------------------------------------
// graph plumbing
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
TensorT<T> make_op_node(Shape shape, std::vector<T> value, std::vector<TensorT<T>> parents,
                        std::function<void()> backprop) {
  bool track = grad_mode();
  if (track) {
    track = false;
    for (const auto& p : parents)
      if (p.requires_grad()) track = true;
  }
  TensorT<T> out = TensorT<T>::from_data(std::move(shape), std::move(value), track);
  if (track) {
    out.node()->parents = std::move(parents);
    out.node()->backprop = std::move(backprop);
  }
  return out;
}

template <typename T>
void check_finite(const TensorT<T>& t, const char* op) {
#ifndef NDEBUG
  for (const T v : t.value())
    if (!std::isfinite(v)) throw std::runtime_error(std::string(op) + ": produced non-finite value");
#else
  (void)t;
  (void)op;
#endif
}

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const size_t nd = std::max(a.size(), b.size());
  Shape out(nd);
  for (size_t i = 0; i < nd; ++i) {
    const int64_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
    const int64_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
    require(da == db || da == 1 || db == 1,
            "broadcast: incompatible shapes " + shape_str(a) + " and " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Row-major strides with zeros on broadcast (size-1 or missing) dims,
// aligned to the trailing dimensions of `out`.
inline std::vector<int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<int64_t> strides(out.size(), 0);
  int64_t s = 1;
  for (size_t i = 0; i < in.size(); ++i) {
    const size_t ri = in.size() - 1 - i;          // index into `in` from the back
    const size_t ro = out.size() - 1 - i;         // matching index into `out`
    strides[ro] = (in[ri] == 1 && out[ro] != 1) ? 0 : s;
    s *= in[ri];
  }
  return strides;
}

// Sums `g` (shaped `gshape`) down to `target`, undoing broadcasting.
template <typename T>
std::vector<T> reduce_grad_to(const std::vector<T>& g, const Shape& gshape, const Shape& target) {
  if (gshape == target) return g;
  std::vector<T> out(static_cast<size_t>(numel(target)), T(0));
  const auto strides = broadcast_strides(target, gshape);
  const size_t nd = gshape.size();
  std::vector<int64_t> coord(nd, 0);
  int64_t off = 0;
  for (size_t lin = 0; lin < g.size(); ++lin) {
    out[static_cast<size_t>(off)] += g[lin];
    for (size_t d = nd; d-- > 0;) {
      coord[d]++;
      off += strides[d];
      if (coord[d] < gshape[d]) break;
      off -= strides[d] * gshape[d];
      coord[d] = 0;
    }
  }
  return out;
}

template <typename T, typename Fwd, typename BwdA, typename BwdB>
TensorT<T> binary_elementwise(const char* op, const TensorT<T>& a, const TensorT<T>& b,
                              Fwd fwd, BwdA dfda, BwdB dfdb) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const size_t n = static_cast<size_t>(numel(out_shape));
  std::vector<T> value(n);

  if (a.shape() == b.shape()) {
    const T* pa = a.value().data();
    const T* pb = b.value().data();
    for (size_t i = 0; i < n; ++i) value[i] = fwd(pa[i], pb[i]);
  } else {
    const auto sa = broadcast_strides(a.shape(), out_shape);
    const auto sb = broadcast_strides(b.shape(), out_shape);
    const size_t nd = out_shape.size();
    std::vector<int64_t> coord(nd, 0);
    int64_t oa = 0, ob = 0;
    for (size_t lin = 0; lin < n; ++lin) {
      value[lin] = fwd(a.value()[static_cast<size_t>(oa)], b.value()[static_cast<size_t>(ob)]);
      for (size_t d = nd; d-- > 0;) {
        coord[d]++;
        oa += sa[d];
        ob += sb[d];
        if (coord[d] < out_shape[d]) break;
        oa -= sa[d] * out_shape[d];
        ob -= sb[d] * out_shape[d];
        coord[d] = 0;
      }
    }
  }

  TensorT<T> out;
  auto* an = a.node();
  auto* bn = b.node();
  TensorNode<T>* on = nullptr;
  out = make_op_node<T>(out_shape, std::move(value), {a, b}, {});
  on = out.node();
  if (out.requires_grad()) {
    const Shape ashape = a.shape(), bshape = b.shape(), oshape = out_shape;
    out.node()->backprop = [an, bn, on, ashape, bshape, oshape, dfda, dfdb]() {
      const auto& g = on->grad;
      const size_t n = g.size();
      const bool same = ashape == oshape && bshape == oshape;
      auto accum = [&](TensorNode<T>* pn, const Shape& pshape, auto df) {
        if (!pn->requires_grad) return;
        std::vector<T> gp(n);
        if (same) {
          for (size_t i = 0; i < n; ++i) gp[i] = df(an->value[i], bn->value[i]) * g[i];
        } else {
          const auto sa = broadcast_strides(an->shape, oshape);
          const auto sb = broadcast_strides(bn->shape, oshape);
          const size_t nd = oshape.size();
          std::vector<int64_t> coord(nd, 0);
          int64_t oa = 0, ob = 0;
          for (size_t lin = 0; lin < n; ++lin) {
            gp[lin] = df(an->value[static_cast<size_t>(oa)], bn->value[static_cast<size_t>(ob)]) * g[lin];
            for (size_t d = nd; d-- > 0;) {
              coord[d]++;
              oa += sa[d];
              ob += sb[d];
              if (coord[d] < oshape[d]) break;
              oa -= sa[d] * oshape[d];
              ob -= sb[d] * oshape[d];
              coord[d] = 0;
            }
          }
        }
        auto reduced = reduce_grad_to(gp, oshape, pshape);
        pn->ensure_grad();
        for (size_t i = 0; i < reduced.size(); ++i) pn->grad[i] += reduced[i];
      };
      accum(an, an->shape, dfda);
      accum(bn, bn->shape, dfdb);
    };
  }
  check_finite(out, op);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_elementwise<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_elementwise<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_elementwise<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <typename T>
TensorT<T> scale(const TensorT<T>& x, double s) {
  const size_t n = x.value().size();
  std::vector<T> value(n);
  const T ts = static_cast<T>(s);
  for (size_t i = 0; i < n; ++i) value[i] = x.value()[i] * ts;
  auto* xn = x.node();
  auto out = detail::make_op_node<T>(x.shape(), std::move(value), {x}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    out.node()->backprop = [xn, on, ts]() {
      xn->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i] * ts;
    };
  }
  detail::check_finite(out, "scale");
  return out;
}

inline constexpr double kLeakySlope = 0.01;

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& x, double slope = kLeakySlope) {
  const size_t n = x.value().size();
  const T s = static_cast<T>(slope);
  std::vector<T> value(n);
  for (size_t i = 0; i < n; ++i) {
    const T v = x.value()[i];
    value[i] = v > T(0) ? v : v * s;
  }
  auto* xn = x.node();
  auto out = detail::make_op_node<T>(x.shape(), std::move(value), {x}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    out.node()->backprop = [xn, on, s]() {
      xn->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i)
        xn->grad[i] += on->grad[i] * (xn->value[i] > T(0) ? T(1) : s);
    };
  }
  detail::check_finite(out, "leaky_relu");
  return out;
}

template <typename T>
TensorT<T> operator+(const TensorT<T>& a, const TensorT<T>& b) { return add(a, b); }
template <typename T>
TensorT<T> operator-(const TensorT<T>& a, const TensorT<T>& b) { return sub(a, b); }
template <typename T>
TensorT<T> operator*(const TensorT<T>& a, const TensorT<T>& b) { return mul(a, b); }

// ---------------------------------------------------------------------------
// matrix products
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  require(a.ndim() == 2 && b.ndim() == 2, "matmul: expects rank-2 tensors");
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner dims disagree, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
  std::vector<T> value(static_cast<size_t>(m * n));
  detail::gemm_nn(m, n, k, a.value().data(), k, b.value().data(), n, value.data(), n, false);
  auto* an = a.node();
  auto* bn = b.node();
  auto out = detail::make_op_node<T>(Shape{m, n}, std::move(value), {a, b}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    out.node()->backprop = [an, bn, on, m, k, n]() {
      const T* g = on->grad.data();
      if (an->requires_grad) {
        an->ensure_grad();
        std::vector<T> bt(static_cast<size_t>(k * n));
        detail::transpose(k, n, bn->value.data(), bt.data());
        detail::gemm_nn(m, k, n, g, n, bt.data(), k, an->grad.data(), k, true);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        std::vector<T> at(static_cast<size_t>(m * k));
        detail::transpose(m, k, an->value.data(), at.data());
        detail::gemm_nn(k, n, m, at.data(), m, g, n, bn->grad.data(), n, true);
      }
    };
  }
  detail::check_finite(out, "matmul");
  return out;
}

/// Batched matmul on rank-3 tensors with equal batch dims.
template <typename T>
TensorT<T> bmm(const TensorT<T>& a, const TensorT<T>& b) {
  require(a.ndim() == 3 && b.ndim() == 3, "bmm: expects rank-3 tensors");
  const int64_t bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  require(b.dim(0) == bs && b.dim(1) == k,
          "bmm: shapes disagree, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> value(static_cast<size_t>(bs * m * n));
  for (int64_t i = 0; i < bs; ++i)
    detail::gemm_nn(m, n, k, a.value().data() + i * m * k, k, b.value().data() + i * k * n, n,
                    value.data() + i * m * n, n, false);
  auto* an = a.node();
  auto* bn = b.node();
  auto out = detail::make_op_node<T>(Shape{bs, m, n}, std::move(value), {a, b}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    out.node()->backprop = [an, bn, on, bs, m, k, n]() {
      if (an->requires_grad) an->ensure_grad();
      if (bn->requires_grad) bn->ensure_grad();
      std::vector<T> scratch(static_cast<size_t>(std::max(k * n, m * k)));
      for (int64_t i = 0; i < bs; ++i) {
        const T* g = on->grad.data() + i * m * n;
        if (an->requires_grad) {
          detail::transpose(k, n, bn->value.data() + i * k * n, scratch.data());
          detail::gemm_nn(m, k, n, g, n, scratch.data(), k, an->grad.data() + i * m * k, k, true);
        }
        if (bn->requires_grad) {
          detail::transpose(m, k, an->value.data() + i * m * k, scratch.data());
          detail::gemm_nn(k, n, m, scratch.data(), m, g, n, bn->grad.data() + i * k * n, n, true);
        }
      }
    };
  }
  detail::check_finite(out, "bmm");
  return out;
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

/// Softmax along `axis`. Entries equal to -inf map to exactly 0; a slice of
/// all -inf maps to all zeros rather than NaN, which is what the attention
/// masking path relies on when a full row is masked.
template <typename T>
TensorT<T> softmax(const TensorT<T>& x, int64_t axis) {
  require(axis >= 0 && axis < x.ndim(), "softmax: axis out of range");
  const Shape& shape = x.shape();
  const int64_t len = shape[static_cast<size_t>(axis)];
  int64_t inner = 1, outer = 1;
  for (int64_t i = axis + 1; i < x.ndim(); ++i) inner *= shape[static_cast<size_t>(i)];
  for (int64_t i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];

  const T neg_inf = -std::numeric_limits<T>::infinity();
  std::vector<T> value(x.value().size());
  const T* in = x.value().data();
  T* outp = value.data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      const int64_t base = o * len * inner + i;
      T mx = neg_inf;
      for (int64_t j = 0; j < len; ++j) mx = std::max(mx, in[base + j * inner]);
      if (mx == neg_inf) {
        for (int64_t j = 0; j < len; ++j) outp[base + j * inner] = T(0);
        continue;
      }
      T sum = T(0);
      for (int64_t j = 0; j < len; ++j) {
        const T v = in[base + j * inner];
        const T e = v == neg_inf ? T(0) : std::exp(v - mx);
        outp[base + j * inner] = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (int64_t j = 0; j < len; ++j) outp[base + j * inner] *= inv;
    }
  }

  auto* xn = x.node();
  auto out = detail::make_op_node<T>(shape, std::move(value), {x}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    out.node()->backprop = [xn, on, len, inner, outer]() {
      xn->ensure_grad();
      const T* y = on->value.data();
      const T* g = on->grad.data();
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t i = 0; i < inner; ++i) {
          const int64_t base = o * len * inner + i;
          T dot = T(0);
          for (int64_t j = 0; j < len; ++j) dot += g[base + j * inner] * y[base + j * inner];
          for (int64_t j = 0; j < len; ++j) {
            const int64_t idx = base + j * inner;
            xn->grad[idx] += y[idx] * (g[idx] - dot);
          }
        }
      }
    };
  }
  detail::check_finite(out, "softmax");
  return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

namespace detail {

inline Shape reduced_shape(const Shape& in, const std::vector<int64_t>& axes, bool keepdims) {
  std::vector<bool> drop(in.size(), false);
  for (int64_t a : axes) {
    require(a >= 0 && a < static_cast<int64_t>(in.size()), "reduce: axis out of range");
    require(!drop[static_cast<size_t>(a)], "reduce: duplicate axis");
    drop[static_cast<size_t>(a)] = true;
  }
  Shape out;
  for (size_t i = 0; i < in.size(); ++i) {
    if (drop[i]) {
      if (keepdims) out.push_back(1);
    } else {
      out.push_back(in[i]);
    }
  }
  if (out.empty()) out.push_back(1);
  return out;
}

// Maps each input linear index to the linear index of its reduction cell.
// Iterating input linearly gives the fixed left-to-right accumulation order.
template <typename T, typename Body>
void for_each_reduction(const Shape& in, const std::vector<int64_t>& axes, Body body) {
  std::vector<bool> reduced(in.size(), false);
  for (int64_t a : axes) reduced[static_cast<size_t>(a)] = true;
  const size_t nd = in.size();
  std::vector<int64_t> out_stride(nd, 0);
  int64_t s = 1;
  for (size_t i = nd; i-- > 0;) {
    if (!reduced[i]) {
      out_stride[i] = s;
      s *= in[i];
    }
  }
  std::vector<int64_t> coord(nd, 0);
  int64_t out_idx = 0;
  const int64_t total = numel(in);
  for (int64_t lin = 0; lin < total; ++lin) {
    body(lin, out_idx);
    for (size_t d = nd; d-- > 0;) {
      coord[d]++;
      out_idx += out_stride[d];
      if (coord[d] < in[d]) break;
      out_idx -= out_stride[d] * in[d];
      coord[d] = 0;
    }
  }
}

}  // namespace detail

template <typename T>
TensorT<T> reduce_sum(const TensorT<T>& x, std::vector<int64_t> axes, bool keepdims = false) {
  const Shape out_shape = detail::reduced_shape(x.shape(), axes, keepdims);
  std::vector<T> value(static_cast<size_t>(numel(out_shape)), T(0));
  const T* in = x.value().data();
  detail::for_each_reduction<T>(x.shape(), axes,
                                [&](int64_t lin, int64_t out) { value[static_cast<size_t>(out)] += in[lin]; });
  auto* xn = x.node();
  auto out = detail::make_op_node<T>(out_shape, std::move(value), {x}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    const Shape in_shape = x.shape();
    out.node()->backprop = [xn, on, in_shape, axes]() {
      xn->ensure_grad();
      detail::for_each_reduction<T>(in_shape, axes, [&](int64_t lin, int64_t o) {
        xn->grad[static_cast<size_t>(lin)] += on->grad[static_cast<size_t>(o)];
      });
    };
  }
  detail::check_finite(out, "reduce_sum");
  return out;
}

template <typename T>
TensorT<T> reduce_mean(const TensorT<T>& x, std::vector<int64_t> axes, bool keepdims = false) {
  int64_t n = 1;
  for (int64_t a : axes) n *= x.dim(a);
  return scale(reduce_sum(x, std::move(axes), keepdims), 1.0 / static_cast<double>(n));
}

template <typename T>
TensorT<T> reduce_max(const TensorT<T>& x, std::vector<int64_t> axes, bool keepdims = false) {
  const Shape out_shape = detail::reduced_shape(x.shape(), axes, keepdims);
  const T lowest = -std::numeric_limits<T>::infinity();
  std::vector<T> value(static_cast<size_t>(numel(out_shape)), lowest);
  const T* in = x.value().data();
  detail::for_each_reduction<T>(x.shape(), axes, [&](int64_t lin, int64_t out) {
    value[static_cast<size_t>(out)] = std::max(value[static_cast<size_t>(out)], in[lin]);
  });
  auto* xn = x.node();
  auto out = detail::make_op_node<T>(out_shape, std::move(value), {x}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    const Shape in_shape = x.shape();
    // Ties route the gradient to the first (left-to-right) max position.
    out.node()->backprop = [xn, on, in_shape, axes]() {
      xn->ensure_grad();
      std::vector<uint8_t> taken(on->value.size(), 0);
      detail::for_each_reduction<T>(in_shape, axes, [&](int64_t lin, int64_t o) {
        if (!taken[static_cast<size_t>(o)] &&
            xn->value[static_cast<size_t>(lin)] == on->value[static_cast<size_t>(o)]) {
          xn->grad[static_cast<size_t>(lin)] += on->grad[static_cast<size_t>(o)];
          taken[static_cast<size_t>(o)] = 1;
        }
      });
    };
  }
  detail::check_finite(out, "reduce_max");
  return out;
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> reshape(const TensorT<T>& x, Shape shape) {
  require(numel(shape) == x.numel(), "reshape: " + shape_str(x.shape()) + " -> " +
                                         shape_str(shape) + " changes element count");
  auto* xn = x.node();
  auto out = detail::make_op_node<T>(std::move(shape), std::vector<T>(x.value()), {x}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    out.node()->backprop = [xn, on]() {
      xn->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
    };
  }
  return out;
}

template <typename T>
TensorT<T> permute(const TensorT<T>& x, std::vector<int64_t> perm) {
  const size_t nd = x.shape().size();
  require(perm.size() == nd, "permute: rank mismatch");
  std::vector<bool> used(nd, false);
  Shape out_shape(nd);
  for (size_t i = 0; i < nd; ++i) {
    require(perm[i] >= 0 && perm[i] < static_cast<int64_t>(nd) && !used[static_cast<size_t>(perm[i])],
            "permute: invalid permutation");
    used[static_cast<size_t>(perm[i])] = true;
    out_shape[i] = x.shape()[static_cast<size_t>(perm[i])];
  }
  std::vector<int64_t> in_strides(nd, 1);
  for (size_t i = nd - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * x.shape()[i + 1];
  std::vector<int64_t> walk(nd);
  for (size_t i = 0; i < nd; ++i) walk[i] = in_strides[static_cast<size_t>(perm[i])];

  const int64_t total = x.numel();
  std::vector<T> value(static_cast<size_t>(total));
  std::vector<int64_t> coord(nd, 0);
  int64_t src = 0;
  for (int64_t lin = 0; lin < total; ++lin) {
    value[static_cast<size_t>(lin)] = x.value()[static_cast<size_t>(src)];
    for (size_t d = nd; d-- > 0;) {
      coord[d]++;
      src += walk[d];
      if (coord[d] < out_shape[d]) break;
      src -= walk[d] * out_shape[d];
      coord[d] = 0;
    }
  }
  auto* xn = x.node();
  auto out = detail::make_op_node<T>(out_shape, std::move(value), {x}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    out.node()->backprop = [xn, on, out_shape, walk, nd]() {
      xn->ensure_grad();
      std::vector<int64_t> coord(nd, 0);
      int64_t src = 0;
      const int64_t total = static_cast<int64_t>(on->grad.size());
      for (int64_t lin = 0; lin < total; ++lin) {
        xn->grad[static_cast<size_t>(src)] += on->grad[static_cast<size_t>(lin)];
        for (size_t d = nd; d-- > 0;) {
          coord[d]++;
          src += walk[d];
          if (coord[d] < out_shape[d]) break;
          src -= walk[d] * out_shape[d];
          coord[d] = 0;
        }
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> concat(const std::vector<TensorT<T>>& xs, int64_t axis) {
  require(!xs.empty(), "concat: empty input list");
  const Shape& first = xs[0].shape();
  require(axis >= 0 && axis < static_cast<int64_t>(first.size()), "concat: axis out of range");
  int64_t axis_total = 0;
  for (const auto& x : xs) {
    require(x.ndim() == static_cast<int64_t>(first.size()), "concat: rank mismatch");
    for (size_t d = 0; d < first.size(); ++d)
      require(d == static_cast<size_t>(axis) || x.shape()[d] == first[d],
              "concat: shape mismatch on non-concat axis");
    axis_total += x.dim(axis);
  }
  Shape out_shape = first;
  out_shape[static_cast<size_t>(axis)] = axis_total;

  int64_t inner = 1, outer = 1;
  for (size_t d = static_cast<size_t>(axis) + 1; d < first.size(); ++d) inner *= first[d];
  for (size_t d = 0; d < static_cast<size_t>(axis); ++d) outer *= first[d];

  std::vector<T> value(static_cast<size_t>(numel(out_shape)));
  int64_t offset = 0;
  for (const auto& x : xs) {
    const int64_t block = x.dim(axis) * inner;
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(value.data() + o * axis_total * inner + offset,
                  x.value().data() + o * block, sizeof(T) * static_cast<size_t>(block));
    offset += block;
  }
  auto out = detail::make_op_node<T>(out_shape, std::move(value), xs, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    std::vector<TensorNode<T>*> pnodes;
    std::vector<int64_t> blocks;
    for (const auto& x : xs) {
      pnodes.push_back(x.node());
      blocks.push_back(x.dim(axis) * inner);
    }
    out.node()->backprop = [on, pnodes, blocks, outer, axis_total, inner]() {
      int64_t offset = 0;
      for (size_t p = 0; p < pnodes.size(); ++p) {
        if (pnodes[p]->requires_grad) {
          pnodes[p]->ensure_grad();
          for (int64_t o = 0; o < outer; ++o) {
            const T* g = on->grad.data() + o * axis_total * inner + offset;
            T* dst = pnodes[p]->grad.data() + o * blocks[p];
            for (int64_t i = 0; i < blocks[p]; ++i) dst[i] += g[i];
          }
        }
        offset += blocks[p];
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> slice(const TensorT<T>& x, int64_t axis, int64_t start, int64_t len) {
  require(axis >= 0 && axis < x.ndim(), "slice: axis out of range");
  require(start >= 0 && len >= 1 && start + len <= x.dim(axis), "slice: range out of bounds");
  Shape out_shape = x.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  int64_t inner = 1, outer = 1;
  for (int64_t d = axis + 1; d < x.ndim(); ++d) inner *= x.dim(d);
  for (int64_t d = 0; d < axis; ++d) outer *= x.dim(d);
  const int64_t axis_len = x.dim(axis);

  std::vector<T> value(static_cast<size_t>(numel(out_shape)));
  for (int64_t o = 0; o < outer; ++o)
    std::memcpy(value.data() + o * len * inner,
                x.value().data() + (o * axis_len + start) * inner,
                sizeof(T) * static_cast<size_t>(len * inner));
  auto* xn = x.node();
  auto out = detail::make_op_node<T>(out_shape, std::move(value), {x}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    out.node()->backprop = [xn, on, outer, inner, len, axis_len, start]() {
      xn->ensure_grad();
      for (int64_t o = 0; o < outer; ++o) {
        const T* g = on->grad.data() + o * len * inner;
        T* dst = xn->grad.data() + (o * axis_len + start) * inner;
        for (int64_t i = 0; i < len * inner; ++i) dst[i] += g[i];
      }
    };
  }
  return out;
}

/// Replaces entries where mask != 0 with `fill` (usually -inf ahead of a
/// softmax). Gradient flows only through the untouched entries; the mask is
/// a constant as far as differentiation is concerned.
template <typename T>
TensorT<T> masked_fill(const TensorT<T>& x, const std::vector<uint8_t>& mask, T fill) {
  require(mask.size() == x.value().size(), "masked_fill: mask size mismatch");
  std::vector<T> value(x.value());
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) value[i] = fill;
  auto* xn = x.node();
  auto out = detail::make_op_node<T>(x.shape(), std::move(value), {x}, {});
  if (out.requires_grad()) {
    auto* on = out.node();
    auto m = std::make_shared<std::vector<uint8_t>>(mask);
    out.node()->backprop = [xn, on, m]() {
      xn->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i)
        if (!(*m)[i]) xn->grad[i] += on->grad[i];
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// backward pass
// ---------------------------------------------------------------------------

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls until zero_grad(); intermediate gradients are transient per call.
template <typename T>
void backward(const TensorT<T>& loss) {
  require(loss.numel() == 1, "backward: loss must be scalar, got " + shape_str(loss.shape()));
  require(loss.requires_grad(), "backward: loss does not reach any tensor requiring grad");

  std::vector<TensorNode<T>*> order;
  std::unordered_set<TensorNode<T>*> seen;
  struct Frame {
    TensorNode<T>* node;
    size_t next_parent;
  };
  std::vector<Frame> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorNode<T>* p = f.node->parents[f.next_parent++].node();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  for (TensorNode<T>* n : order) {
    if (n->grad.size() != n->value.size())
      n->grad.assign(n->value.size(), T(0));
    else if (!n->is_leaf())
      std::fill(n->grad.begin(), n->grad.end(), T(0));
  }
  loss.node()->grad[0] += T(1);

  for (size_t i = order.size(); i-- > 0;) {
    if (order[i]->backprop) order[i]->backprop();
  }
  for (TensorNode<T>* n : order) {
    if (!n->is_leaf()) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

}  // namespace plasm
