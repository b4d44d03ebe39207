// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
//
// PLCK checkpoint container: named f32 tensors for the encoder (phi),
// translator (psi), decoder (omega), spatial masking module (sm) and
// optimizer moments, plus a config echo. Save/load round-trips are
// byte-identical.

#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "plasm/common.hpp"

namespace plasm {

struct TensorBlob {
  Shape dims;
  std::vector<float> data;
};

struct Checkpoint {
  enum class Phase : uint8_t { pretrained = 0, trained = 1 };

  Phase phase = Phase::pretrained;
  std::vector<std::pair<std::string, TensorBlob>> tensors;  // file order preserved
  std::string config_echo;

  void add(const std::string& name, Shape dims, std::vector<float> data) {
    tensors.emplace_back(name, TensorBlob{std::move(dims), std::move(data)});
  }

  const TensorBlob* find(const std::string& name) const {
    for (const auto& [n, blob] : tensors)
      if (n == name) return &blob;
    return nullptr;
  }

  std::unordered_map<std::string, std::vector<float>> to_map() const {
    std::unordered_map<std::string, std::vector<float>> out;
    for (const auto& [n, blob] : tensors) out.emplace(n, blob.data);
    return out;
  }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace plasm
