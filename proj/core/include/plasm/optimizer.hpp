// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "plasm/layers.hpp"
#include "plasm/tensor.hpp"

namespace plasm {

enum class Schedule { constant, cosine, one_cycle };

inline Schedule schedule_from_string(const std::string& s) {
  if (s == "constant") return Schedule::constant;
  if (s == "cosine") return Schedule::cosine;
  if (s == "one_cycle" || s == "one-cycle") return Schedule::one_cycle;
  throw ConfigError("unknown schedule '" + s + "' (constant|cosine|one_cycle)");
}

inline std::string schedule_name(Schedule s) {
  switch (s) {
    case Schedule::constant: return "constant";
    case Schedule::cosine: return "cosine";
    default: return "one_cycle";
  }
}

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Schedule schedule = Schedule::constant;
  int64_t total_steps = 0;

  void validate() const {
    require(lr > 0.0, "optimizer: lr must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
            "optimizer: betas must be in [0,1)");
  }
};

/// Learning rate at `step` of `total_steps`. The one-cycle shape is a linear
/// warmup over the first 30% of steps from base/25 up to base, then cosine
/// decay down to base/1e4.
inline double lr_at(Schedule schedule, int64_t step, int64_t total_steps, double base_lr) {
  require(step >= 0 && (total_steps == 0 || step <= total_steps), "lr_at: step out of range");
  switch (schedule) {
    case Schedule::constant:
      return base_lr;
    case Schedule::cosine: {
      const double t = static_cast<double>(step) / static_cast<double>(total_steps);
      return base_lr * (1.0 + std::cos(3.14159265358979323846 * t)) / 2.0;
    }
    case Schedule::one_cycle: {
      const double warm = 0.3 * static_cast<double>(total_steps);
      const double start_lr = base_lr / 25.0;
      const double end_lr = base_lr / 1e4;
      if (static_cast<double>(step) <= warm)
        return warm == 0.0 ? base_lr : start_lr + (base_lr - start_lr) * (static_cast<double>(step) / warm);
      const double t = (static_cast<double>(step) - warm) / (static_cast<double>(total_steps) - warm);
      return end_lr + (base_lr - end_lr) * (1.0 + std::cos(3.14159265358979323846 * t)) / 2.0;
    }
  }
  return base_lr;
}

/// Bias-corrected Adam over a fixed list of named parameters. State update
/// order is the parameter list order, so identical runs are bit-identical.
template <typename T>
class AdamT {
 public:
  AdamT(NamedParams<T> params, OptimizerConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].second.value().size(), T(0));
      v_[i].assign(params_[i].second.value().size(), T(0));
    }
  }

  /// One update with the scheduled learning rate; `step_count` is the number
  /// of completed steps (the first call runs with step index 0).
  void step() {
    const double lr = lr_at(cfg_.schedule, step_count_, cfg_.total_steps, cfg_.lr);
    ++step_count_;
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T bc1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, static_cast<double>(step_count_)));
    const T bc2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, static_cast<double>(step_count_)));
    const T eps = static_cast<T>(cfg_.eps);
    const T tlr = static_cast<T>(lr);
    for (size_t p = 0; p < params_.size(); ++p) {
      auto& tensor = params_[p].second;
      require(tensor.has_grad(), "adam: missing gradient for " + params_[p].first);
      const auto& g = tensor.grad();
      auto& w = tensor.value();
      auto& m = m_[p];
      auto& v = v_[p];
      for (size_t i = 0; i < w.size(); ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        w[i] -= tlr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  void zero_grad() {
    for (auto& [name, tensor] : params_) tensor.zero_grad();
  }

  double current_lr() const { return lr_at(cfg_.schedule, step_count_, cfg_.total_steps, cfg_.lr); }
  int64_t step_count() const { return step_count_; }
  const NamedParams<T>& params() const { return params_; }

  /// Moment buffers as named tensors for checkpointing.
  NamedParams<T> named_state() const {
    NamedParams<T> out;
    for (size_t p = 0; p < params_.size(); ++p) {
      const Shape& shape = params_[p].second.shape();
      out.emplace_back("opt.m." + params_[p].first, TensorT<T>::from_data(shape, m_[p]));
      out.emplace_back("opt.v." + params_[p].first, TensorT<T>::from_data(shape, v_[p]));
    }
    out.emplace_back("opt.step", TensorT<T>::from_data({1}, {static_cast<T>(step_count_)}));
    return out;
  }

  void load_state(const std::unordered_map<std::string, std::vector<float>>& state) {
    for (size_t p = 0; p < params_.size(); ++p) {
      auto im = state.find("opt.m." + params_[p].first);
      auto iv = state.find("opt.v." + params_[p].first);
      require(im != state.end() && iv != state.end(),
              "checkpoint: missing optimizer state for " + params_[p].first);
      require(im->second.size() == m_[p].size() && iv->second.size() == v_[p].size(),
              "checkpoint: optimizer state size mismatch for " + params_[p].first);
      for (size_t i = 0; i < m_[p].size(); ++i) {
        m_[p][i] = static_cast<T>(im->second[i]);
        v_[p][i] = static_cast<T>(iv->second[i]);
      }
    }
    auto is = state.find("opt.step");
    if (is != state.end() && !is->second.empty())
      step_count_ = static_cast<int64_t>(is->second[0]);
  }

 private:
  NamedParams<T> params_;
  OptimizerConfig cfg_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  int64_t step_count_ = 0;
};

using Adam = AdamT<float>;

}  // namespace plasm
