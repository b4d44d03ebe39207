// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0

#include "plasm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_set>

#include "plasm/detail/io.hpp"

namespace plasm {

namespace {
constexpr char kMagic[4] = {'P', 'L', 'C', 'K'};
constexpr uint8_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  detail::write_bytes(os, kMagic, 4);
  detail::write_u8(os, kVersion);
  detail::write_u8(os, static_cast<uint8_t>(ckpt.phase));
  detail::write_u32le(os, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, blob] : ckpt.tensors) {
    detail::write_u16le(os, static_cast<uint16_t>(name.size()));
    detail::write_bytes(os, name.data(), name.size());
    detail::write_u8(os, static_cast<uint8_t>(blob.dims.size()));
    for (int64_t d : blob.dims) detail::write_u32le(os, static_cast<uint32_t>(d));
    detail::write_f32le_array(os, blob.data.data(), blob.data.size());
  }
  detail::write_u32le(os, static_cast<uint32_t>(ckpt.config_echo.size()));
  detail::write_bytes(os, ckpt.config_echo.data(), ckpt.config_echo.size());
  if (!os) throw FormatError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  char magic[4];
  detail::read_bytes(is, magic, 4, "PLCK magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic: not a PLCK file");
  const uint8_t version = detail::read_u8(is, "PLCK version");
  if (version != kVersion)
    throw FormatError("unsupported PLCK version " + std::to_string(version));
  const uint8_t phase = detail::read_u8(is, "PLCK phase");
  if (phase > 1) throw FormatError("unknown PLCK phase tag " + std::to_string(phase));

  Checkpoint ckpt;
  ckpt.phase = static_cast<Checkpoint::Phase>(phase);
  const uint32_t count = detail::read_u32le(is, "PLCK tensor count");
  std::unordered_set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = detail::read_u16le(is, "tensor name length");
    std::string name(name_len, '\0');
    detail::read_bytes(is, name.data(), name_len, "tensor name");
    if (!seen.insert(name).second)
      throw FormatError("duplicate tensor name '" + name + "' in checkpoint");
    const uint8_t ndim = detail::read_u8(is, "tensor rank");
    TensorBlob blob;
    uint64_t total = 1;
    for (uint8_t d = 0; d < ndim; ++d) {
      const uint32_t dim = detail::read_u32le(is, "tensor dim");
      if (dim == 0 || total > (uint64_t(1) << 40) / std::max<uint64_t>(dim, 1))
        throw FormatError("tensor dimension overflow in checkpoint");
      total *= dim;
      blob.dims.push_back(dim);
    }
    blob.data.resize(total);
    detail::read_f32le_array(is, blob.data.data(), blob.data.size(), "tensor payload");
    ckpt.tensors.emplace_back(std::move(name), std::move(blob));
  }
  const uint32_t echo_len = detail::read_u32le(is, "config echo length");
  ckpt.config_echo.resize(echo_len);
  detail::read_bytes(is, ckpt.config_echo.data(), echo_len, "config echo");
  is.peek();
  if (!is.eof()) throw FormatError("PLCK file has trailing bytes");
  return ckpt;
}

}  // namespace plasm
