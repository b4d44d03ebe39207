// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "plasm/common.hpp"

namespace plasm::detail {

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u8(std::ostream& os, uint8_t v) { write_bytes(os, &v, 1); }

inline void write_u16le(std::ostream& os, uint16_t v) {
  const uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  write_bytes(os, b, 2);
}

inline void write_u32le(std::ostream& os, uint32_t v) {
  const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                        static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  write_bytes(os, b, 4);
}

inline void write_f32le(std::ostream& os, float v) {
  write_u32le(os, std::bit_cast<uint32_t>(v));
}

inline void write_f32le_array(std::ostream& os, const float* data, size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    write_bytes(os, data, n * sizeof(float));
  } else {
    for (size_t i = 0; i < n; ++i) write_f32le(os, data[i]);
  }
}

inline void read_bytes(std::istream& is, void* p, size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n)
    throw FormatError(std::string("truncated file while reading ") + what);
}

inline uint8_t read_u8(std::istream& is, const char* what) {
  uint8_t v;
  read_bytes(is, &v, 1, what);
  return v;
}

inline uint16_t read_u16le(std::istream& is, const char* what) {
  uint8_t b[2];
  read_bytes(is, b, 2, what);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

inline uint32_t read_u32le(std::istream& is, const char* what) {
  uint8_t b[4];
  read_bytes(is, b, 4, what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline float read_f32le(std::istream& is, const char* what) {
  return std::bit_cast<float>(read_u32le(is, what));
}

inline void read_f32le_array(std::istream& is, float* data, size_t n, const char* what) {
  if constexpr (std::endian::native == std::endian::little) {
    read_bytes(is, data, n * sizeof(float), what);
  } else {
    for (size_t i = 0; i < n; ++i) data[i] = read_f32le(is, what);
  }
}

}  // namespace plasm::detail
