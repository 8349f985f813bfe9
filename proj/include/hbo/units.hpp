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

#include <string>
#include <utility>
#include <vector>

#include "hbo/ops.hpp"
#include "hbo/tensor.hpp"

namespace hbo {

// One convolution with its optional normalization, activation and bias, the
// unit every block and network layer is assembled from.
struct ConvUnit {
  std::string name;
  ConvKernel kernel;
  int stride = 1;
  int pad = 0;
  bool has_bn = true;
  nn::BatchNormParams bn;
  bool relu6 = true;
  bool has_bias = false;
  std::vector<double> bias;
  // Position in the owning network's unit list; -1 when standalone.
  int uid = -1;

  ConvUnit() = default;
  ConvUnit(std::string name_, ConvKernel kernel_, int stride_, bool has_bn_,
           bool relu6_, bool has_bias_ = false)
      : name(std::move(name_)),
        kernel(std::move(kernel_)),
        stride(stride_),
        pad((kernel.k_h - 1) / 2),
        has_bn(has_bn_),
        bn(has_bn_ ? kernel.c_out : 0),
        relu6(relu6_),
        has_bias(has_bias_),
        bias(has_bias_ ? static_cast<std::size_t>(kernel.c_out) : 0, 0.0) {}

  // Weights + BN affine + bias. Running statistics are buffers, not params.
  std::size_t param_count() const {
    std::size_t n = kernel.size();
    if (has_bn) n += 2 * static_cast<std::size_t>(kernel.c_out);
    if (has_bias) n += static_cast<std::size_t>(kernel.c_out);
    return n;
  }
};

// Learnable state of one block, in execution order.
struct BlockParams {
  std::vector<ConvUnit> units;

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& u : units) n += u.param_count();
    return n;
  }
};

}  // namespace hbo
