// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "plasm/config.hpp"
#include "plasm/optimizer.hpp"

namespace plasm {

/// Full run configuration: architecture plus training knobs. Named presets
/// pin the per-dataset hyper-parameters; `key = value` config files and CLI
/// flags override preset defaults.
struct RunConfig {
  ModelConfig model;
  double lr = 0.01;
  Schedule schedule = Schedule::one_cycle;
  int64_t batch_size = 16;
  uint64_t seed = 0;
  std::string preset = "mmnist";
  std::string data_path;

  void validate() const {
    model.validate();
    require(lr > 0.0, "config: lr must be positive");
    require(batch_size >= 1, "config: batch_size must be >= 1");
  }
};

/// Known presets: mmnist, taxibj, human36m, kitti, kth, kth40.
RunConfig preset_config(const std::string& name);

/// Applies one `key = value` override; throws ConfigError on unknown keys.
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

/// Parses a config file of `key = value` lines ('#' starts a comment).
/// A `preset` line, if present, is applied first; other lines override it.
RunConfig parse_config_file(const std::string& path);

/// Canonical text form; parsing it back reproduces the config exactly.
std::string serialize_config(const RunConfig& cfg);

RunConfig parse_config_text(const std::string& text);

}  // namespace plasm
