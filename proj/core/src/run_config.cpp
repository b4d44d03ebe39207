// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0

#include "plasm/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace plasm {

namespace {

RunConfig base_preset(int64_t h, int64_t w, int64_t c, int64_t t_in, int64_t t_out, double r0,
                      int64_t enc_width, int64_t trans_width, int64_t enc_depth,
                      int64_t trans_depth, int64_t epochs, int64_t heads, double lr,
                      Schedule schedule) {
  RunConfig cfg;
  cfg.model.height = h;
  cfg.model.width = w;
  cfg.model.channels = c;
  cfg.model.t_in = t_in;
  cfg.model.t_out = t_out;
  cfg.model.input_mask_ratio = r0;
  cfg.model.enc_width = enc_width;
  cfg.model.trans_width = trans_width;
  cfg.model.enc_depth = enc_depth;
  cfg.model.trans_depth = trans_depth;
  cfg.model.epochs = epochs;
  cfg.model.heads = heads;
  cfg.model.feature_mask_ratio = 0.1;
  cfg.lr = lr;
  cfg.schedule = schedule;
  cfg.batch_size = 16;
  return cfg;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config: boolean expected for '" + key + "', got '" + v + "'");
}

int64_t parse_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: integer expected for '" + key + "', got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: number expected for '" + key + "', got '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  size_t e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig preset_config(const std::string& name) {
  RunConfig cfg;
  if (name == "mmnist") {
    cfg = base_preset(64, 64, 1, 10, 10, 0.96, 64, 512, 4, 4, 2000, 2, 0.01, Schedule::one_cycle);
  } else if (name == "taxibj") {
    cfg = base_preset(32, 32, 2, 4, 4, 0.97, 32, 256, 2, 4, 50, 8, 0.001, Schedule::cosine);
  } else if (name == "human36m") {
    cfg = base_preset(128, 128, 3, 4, 4, 0.95, 64, 128, 2, 3, 50, 2, 0.001, Schedule::one_cycle);
  } else if (name == "kitti") {
    cfg = base_preset(128, 160, 3, 10, 1, 0.95, 64, 256, 2, 3, 50, 8, 0.001, Schedule::one_cycle);
  } else if (name == "kth") {
    cfg = base_preset(128, 128, 1, 10, 20, 0.90, 32, 128, 3, 3, 100, 2, 0.001, Schedule::one_cycle);
  } else if (name == "kth40") {
    cfg = base_preset(128, 128, 1, 10, 40, 0.90, 32, 128, 3, 3, 100, 2, 0.001, Schedule::one_cycle);
  } else {
    throw ConfigError("unknown preset '" + name +
                      "' (mmnist|taxibj|human36m|kitti|kth|kth40)");
  }
  cfg.preset = name;
  return cfg;
}

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "preset") {
    const auto keep_data = cfg.data_path;
    const auto keep_seed = cfg.seed;
    cfg = preset_config(value);
    cfg.data_path = keep_data;
    cfg.seed = keep_seed;
  } else if (key == "height") {
    cfg.model.height = parse_int(value, key);
  } else if (key == "width") {
    cfg.model.width = parse_int(value, key);
  } else if (key == "channels") {
    cfg.model.channels = parse_int(value, key);
  } else if (key == "t_in") {
    cfg.model.t_in = parse_int(value, key);
  } else if (key == "t_out") {
    cfg.model.t_out = parse_int(value, key);
  } else if (key == "enc_width") {
    cfg.model.enc_width = parse_int(value, key);
  } else if (key == "trans_width") {
    cfg.model.trans_width = parse_int(value, key);
  } else if (key == "enc_depth") {
    cfg.model.enc_depth = parse_int(value, key);
  } else if (key == "trans_depth") {
    cfg.model.trans_depth = parse_int(value, key);
  } else if (key == "heads") {
    cfg.model.heads = parse_int(value, key);
  } else if (key == "input_mask_ratio") {
    cfg.model.input_mask_ratio = parse_double(value, key);
  } else if (key == "feature_mask_ratio") {
    cfg.model.feature_mask_ratio = parse_double(value, key);
  } else if (key == "epochs") {
    cfg.model.epochs = parse_int(value, key);
  } else if (key == "use_pla") {
    cfg.model.use_pla = parse_bool(value, key);
  } else if (key == "convnext_blocks") {
    cfg.model.convnext_blocks = parse_bool(value, key);
  } else if (key == "lr") {
    cfg.lr = parse_double(value, key);
  } else if (key == "schedule") {
    cfg.schedule = schedule_from_string(value);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_int(value, key);
  } else if (key == "seed") {
    try {
      cfg.seed = std::stoull(value);
    } catch (const std::exception&) {
      throw ConfigError("config: integer expected for 'seed', got '" + value + "'");
    }
  } else if (key == "data") {
    cfg.data_path = value;
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

RunConfig parse_config_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::pair<std::string, std::string>> kvs;
  std::string preset;
  while (std::getline(is, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "preset")
      preset = value;
    else
      kvs.emplace_back(key, value);
  }
  RunConfig cfg = preset.empty() ? RunConfig{} : preset_config(preset);
  for (const auto& [k, v] : kvs) apply_config_kv(cfg, k, v);
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  out += "preset = " + cfg.preset + "\n";
  out += "height = " + std::to_string(cfg.model.height) + "\n";
  out += "width = " + std::to_string(cfg.model.width) + "\n";
  out += "channels = " + std::to_string(cfg.model.channels) + "\n";
  out += "t_in = " + std::to_string(cfg.model.t_in) + "\n";
  out += "t_out = " + std::to_string(cfg.model.t_out) + "\n";
  out += "enc_width = " + std::to_string(cfg.model.enc_width) + "\n";
  out += "trans_width = " + std::to_string(cfg.model.trans_width) + "\n";
  out += "enc_depth = " + std::to_string(cfg.model.enc_depth) + "\n";
  out += "trans_depth = " + std::to_string(cfg.model.trans_depth) + "\n";
  out += "heads = " + std::to_string(cfg.model.heads) + "\n";
  out += "input_mask_ratio = " + fmt_double(cfg.model.input_mask_ratio) + "\n";
  out += "feature_mask_ratio = " + fmt_double(cfg.model.feature_mask_ratio) + "\n";
  out += "epochs = " + std::to_string(cfg.model.epochs) + "\n";
  out += "use_pla = " + std::string(cfg.model.use_pla ? "true" : "false") + "\n";
  out += "convnext_blocks = " + std::string(cfg.model.convnext_blocks ? "true" : "false") + "\n";
  out += "lr = " + fmt_double(cfg.lr) + "\n";
  out += "schedule = " + schedule_name(cfg.schedule) + "\n";
  out += "batch_size = " + std::to_string(cfg.batch_size) + "\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  return out;
}

}  // namespace plasm
