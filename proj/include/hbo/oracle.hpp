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

#include <cstdint>

#include "hbo/tensor.hpp"

namespace hbo {

// Counts multiply-accumulate operations performed by the oracle. Padding taps
// are counted too (they multiply by an implicit zero), so the count equals
// h_out * w_out * c_out * c_in_per_group * k_h * k_w per sample.
struct MacCounter {
  std::uint64_t macs = 0;
};

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Direct grouped convolution with zero padding, written as the plain nested
// loop. This is the reference every optimized path is checked against.
inline Tensor conv2d_oracle(const Tensor& x, const ConvKernel& w, int stride,
                            int pad, MacCounter* counter = nullptr) {
  if (stride < 1) throw ArgumentError("stride must be >= 1");
  if (pad < 0) throw ArgumentError("pad must be >= 0");
  if (x.c() != w.groups * w.c_in_per_group) {
    throw DimensionError("input has " + std::to_string(x.c()) +
                         " channels, kernel expects " +
                         std::to_string(w.groups) + " groups x " +
                         std::to_string(w.c_in_per_group));
  }
  const int ho = conv_out_dim(x.h(), w.k_h, stride, pad);
  const int wo = conv_out_dim(x.w(), w.k_w, stride, pad);
  if (ho < 1 || wo < 1) {
    throw DimensionError("kernel larger than padded input");
  }
  Tensor y(Shape{x.n(), w.c_out, ho, wo});
  const int opg = w.c_out_per_group();
  std::uint64_t macs = 0;
  for (int i = 0; i < x.n(); ++i) {
    for (int o = 0; o < w.c_out; ++o) {
      const int g = o / opg;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          double acc = 0.0;
          for (int ci = 0; ci < w.c_in_per_group; ++ci) {
            const int c = g * w.c_in_per_group + ci;
            for (int ky = 0; ky < w.k_h; ++ky) {
              for (int kx = 0; kx < w.k_w; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                const bool inside =
                    iy >= 0 && iy < x.h() && ix >= 0 && ix < x.w();
                const double v = inside ? x.at(i, c, iy, ix) : 0.0;
                acc += v * w.at(o, ci, ky, kx);
                ++macs;
              }
            }
          }
          y.at(i, o, oy, ox) = acc;
        }
      }
    }
  }
  if (counter != nullptr) counter->macs += macs;
  return y;
}

}  // namespace hbo
