// Copyright 2026 The HBO Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "hbo/tensor.hpp"

// Golden-file tensor dump: 16-byte header of four little-endian u32 dims
// (n, c, h, w) followed by n*c*h*w little-endian IEEE-754 f64 values.
namespace hbo::io {

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff),
                              static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const Tensor& t) {
  const Shape& s = t.shape();
  for (int d : {s.n, s.c, s.h, s.w}) {
    detail::put_u32(os, static_cast<std::uint32_t>(d));
  }
  for (double v : t.data()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) {
      b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    }
    os.write(b.data(), 8);
  }
  if (!os) throw DataError("failed writing tensor dump");
}

inline Tensor read_tensor(std::istream& is) {
  std::array<unsigned char, 16> header{};
  if (!is.read(reinterpret_cast<char*>(header.data()), 16)) {
    throw DataError("tensor dump truncated: missing 16-byte header");
  }
  std::array<std::uint32_t, 4> dims{};
  for (int i = 0; i < 4; ++i) {
    dims[i] = detail::get_u32(header.data() + 4 * i);
    if (dims[i] == 0 || dims[i] > (1u << 30)) {
      throw DataError("tensor dump has invalid dim " + std::to_string(dims[i]));
    }
  }
  Shape s{static_cast<int>(dims[0]), static_cast<int>(dims[1]),
          static_cast<int>(dims[2]), static_cast<int>(dims[3])};
  std::vector<double> data(s.numel());
  std::array<unsigned char, 8> b{};
  for (double& v : data) {
    if (!is.read(reinterpret_cast<char*>(b.data()), 8)) {
      throw DataError("tensor dump truncated: expected " +
                      std::to_string(s.numel()) + " values");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    v = std::bit_cast<double>(bits);
  }
  return Tensor(s, std::move(data));
}

inline void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  write_tensor(os, t);
}

inline Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  return read_tensor(is);
}

}  // namespace hbo::io
