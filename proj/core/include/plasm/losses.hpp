// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "plasm/tensor.hpp"

namespace plasm {

namespace detail {

// Reporting convention used everywhere: mean over batch and frames, sum over
// channels/height/width, pixels in [0,1].
template <typename T>
TensorT<T> frame_sq_error(const TensorT<T>& a, const TensorT<T>& b) {
  require(a.ndim() == 5 && b.ndim() == 5, "loss: expects [B,T,C,H,W]");
  require(a.shape() == b.shape(), "loss: shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  auto d = sub(a, b);
  return reduce_mean(reduce_sum(mul(d, d), {2, 3, 4}), {0, 1});
}

}  // namespace detail

/// Reconstruction loss over the input segment (pretraining objective).
template <typename T>
TensorT<T> loss_reconstruction(const TensorT<T>& x, const TensorT<T>& x_hat) {
  return detail::frame_sq_error(x, x_hat);
}

/// Prediction loss over the target segment (training objective).
template <typename T>
TensorT<T> loss_prediction(const TensorT<T>& y, const TensorT<T>& y_hat) {
  return detail::frame_sq_error(y, y_hat);
}

}  // namespace plasm
