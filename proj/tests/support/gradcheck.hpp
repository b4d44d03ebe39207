// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference gradient checking (f64). The numeric side
// rebuilds the forward graph per perturbed element, so it is independent of
// the backward implementation it validates.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "plasm/tensor.hpp"

namespace plasm::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares backward() gradients of `loss_fn` against central differences
/// for every element of every tensor in `wrt`. loss_fn must rebuild the
/// graph from the current leaf values on each call. Relative error uses a
/// small floor so near-zero gradients compare on an absolute scale.
inline GradCheckResult grad_check(const std::function<TensorT<double>()>& loss_fn,
                                  std::vector<TensorT<double>> wrt, double h = 1e-5) {
  for (auto& t : wrt) t.zero_grad();
  backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  analytic.reserve(wrt.size());
  for (auto& t : wrt) analytic.push_back(t.grad());

  GradCheckResult result;
  for (size_t p = 0; p < wrt.size(); ++p) {
    auto& values = wrt[p].value();
    for (size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      values[i] = keep + h;
      const double up = loss_fn().item();
      values[i] = keep - h;
      const double down = loss_fn().item();
      values[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

/// Scalar probe: sum(y * w) with fixed pseudo-random weights, giving every
/// output element a distinct influence on the loss.
inline TensorT<double> weighted_sum(const TensorT<double>& y, const TensorT<double>& weights) {
  std::vector<int64_t> axes(y.shape().size());
  for (size_t i = 0; i < axes.size(); ++i) axes[i] = static_cast<int64_t>(i);
  return reduce_sum(mul(y, weights), axes);
}

inline TensorT<double> probe_weights(const Shape& shape, uint64_t seed) {
  Rng rng(seed, 555);
  return rand_uniform<double>(shape, rng, -1.0, 1.0);
}

}  // namespace plasm::testing
