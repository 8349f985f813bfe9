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

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "hbo/exec.hpp"
#include "hbo/units.hpp"

namespace hbo {

// Rounds v to a multiple of divisor: nearest multiple, never below min_value
// (default: divisor), bumped up one step if rounding lost more than 10%.
inline int make_divisible(double v, int divisor, int min_value = 0) {
  if (divisor < 1) throw ArgumentError("divisor must be >= 1");
  if (!(v > 0.0)) throw ArgumentError("channel count must be > 0");
  if (min_value <= 0) min_value = divisor;
  int r = std::max(min_value,
                   static_cast<int>(v + divisor / 2.0) / divisor * divisor);
  if (r < 0.9 * v) r += divisor;
  return r;
}

enum class BlockKind { InvertedResidual, HarmoniousBottleneck };

inline const char* to_string(BlockKind k) {
  return k == BlockKind::InvertedResidual ? "inverted_residual" : "hbo";
}

struct BlockConfig {
  int c_in = 1;
  int c_out = 1;
  double t = 1.0;
  int stride = 1;
  BlockKind kind = BlockKind::HarmoniousBottleneck;
  // Number of stride-2 spatial contraction units (HBO only).
  int k = 1;
  // Contraction, expansion and inverted-residual depthwise kernel.
  int spatial_kernel = 3;
  // Depthwise kernel inside the HBO expansion-contraction body.
  int body_kernel = 3;
  // HBO: add the body input's first c_out/2 channels around the body when
  // the block maps c_in == c_out at stride 1.
  bool residual = true;
  // Omit the expansion conv when it would be the identity width (t == 1).
  bool skip_identity_expansion = false;

  int hidden() const { return static_cast<int>(std::lround(t * c_in)); }
  int half() const { return c_out / 2; }
  bool has_expansion() const { return !(skip_identity_expansion && hidden() == c_in); }
  bool has_residual() const {
    if (stride != 1 || c_in != c_out) return false;
    return kind == BlockKind::InvertedResidual || residual;
  }

  void validate() const {
    if (c_in < 1 || c_out < 1) throw ConfigError("block channels must be >= 1");
    if (!(t > 0.0) || hidden() < 1) throw ConfigError("expansion factor must be > 0");
    if (stride != 1 && stride != 2) throw ConfigError("block stride must be 1 or 2");
    for (int kk : {spatial_kernel, body_kernel}) {
      if (kk < 1 || kk % 2 == 0) throw ConfigError("block kernels must be odd");
    }
    if (kind == BlockKind::HarmoniousBottleneck) {
      if (c_out % 2 != 0) {
        throw ConfigError("HBO c_out must be even, got " + std::to_string(c_out));
      }
      if (c_in < c_out / 2) {
        throw ConfigError("HBO needs c_in >= c_out/2, got c_in " + std::to_string(c_in) +
                          ", c_out " + std::to_string(c_out));
      }
      if (k < 1) throw ConfigError("HBO contraction count must be >= 1");
    }
  }
};

// Parameter layout fully determined by cfg. Kernels are zero and BN is the
// identity; see network init for random weights.
//   HBO: contract0..k-1 (dw, s2), [expand (pw)], body_dw, project (pw,
//        linear), restore_dw
//   inverted residual: [expand (pw)], dw (stride s), project (pw, linear)
inline BlockParams make_block_params(const BlockConfig& cfg,
                                     const std::string& prefix = "") {
  cfg.validate();
  BlockParams p;
  const int hid = cfg.hidden();
  const std::string pre = prefix.empty() ? "" : prefix + "/";
  if (cfg.kind == BlockKind::HarmoniousBottleneck) {
    for (int j = 0; j < cfg.k; ++j) {
      p.units.emplace_back(pre + "contract" + std::to_string(j),
                           ConvKernel::depthwise(cfg.c_in, cfg.spatial_kernel), 2, true,
                           j == 0);
    }
    if (cfg.has_expansion()) {
      p.units.emplace_back(pre + "expand", ConvKernel::pointwise(cfg.c_in, hid), 1, true,
                           true);
    }
    p.units.emplace_back(pre + "body_dw", ConvKernel::depthwise(hid, cfg.body_kernel), 1,
                         true, true);
    p.units.emplace_back(pre + "project", ConvKernel::pointwise(hid, cfg.half()), 1, true,
                         false);
    p.units.emplace_back(pre + "restore_dw",
                         ConvKernel::depthwise(cfg.half(), cfg.spatial_kernel), 1, true,
                         true);
  } else {
    if (cfg.has_expansion()) {
      p.units.emplace_back(pre + "expand", ConvKernel::pointwise(cfg.c_in, hid), 1, true,
                           true);
    }
    p.units.emplace_back(pre + "dw", ConvKernel::depthwise(hid, cfg.spatial_kernel),
                         cfg.stride, true, true);
    p.units.emplace_back(pre + "project", ConvKernel::pointwise(hid, cfg.c_out), 1, true,
                         false);
  }
  return p;
}

inline std::size_t expected_unit_count(const BlockConfig& cfg) {
  const std::size_t e = cfg.has_expansion() ? 1 : 0;
  return cfg.kind == BlockKind::HarmoniousBottleneck
             ? static_cast<std::size_t>(cfg.k) + e + 3
             : e + 2;
}

// One line per unit: name, kernel (c_out x c_in/g x kh x kw), groups, stride.
inline std::string describe(const BlockParams& p) {
  std::ostringstream os;
  for (const auto& u : p.units) {
    const auto& k = u.kernel;
    os << u.name << " " << k.c_out << "x" << k.c_in_per_group << "x" << k.k_h << "x"
       << k.k_w << " g" << k.groups << " s" << u.stride << (u.has_bn ? " bn" : "")
       << (u.relu6 ? " relu6" : "") << (u.has_bias ? " bias" : "") << "\n";
  }
  return os.str();
}

namespace detail {

inline void check_block(const BlockConfig& cfg, const BlockParams& p, BlockKind kind,
                        const Shape& x) {
  cfg.validate();
  if (cfg.kind != kind) throw ConfigError("block kind mismatch");
  if (p.units.size() != expected_unit_count(cfg)) {
    throw ConfigError("block has " + std::to_string(p.units.size()) +
                      " units, config needs " + std::to_string(expected_unit_count(cfg)));
  }
  if (x.c != cfg.c_in) {
    throw DimensionError("block expects " + std::to_string(cfg.c_in) +
                         " input channels, got " + std::to_string(x.c));
  }
}

}  // namespace detail

template <class Ops>
typename Ops::Value inverted_residual(Ops& ops, const BlockConfig& cfg, const BlockParams& p,
                                      const typename Ops::Value& x) {
  detail::check_block(cfg, p, BlockKind::InvertedResidual, ops.shape_of(x));
  std::size_t u = 0;
  typename Ops::Value y = x;
  if (cfg.has_expansion()) y = ops.unit(p.units[u++], y);
  y = ops.unit(p.units[u++], y);
  y = ops.unit(p.units[u++], y);
  if (cfg.has_residual()) y = ops.add(y, x);
  return y;
}

template <class Ops>
typename Ops::Value harmonious_bottleneck(Ops& ops, const BlockConfig& cfg,
                                          const BlockParams& p,
                                          const typename Ops::Value& x) {
  const Shape s = ops.shape_of(x);
  detail::check_block(cfg, p, BlockKind::HarmoniousBottleneck, s);
  const int f = 1 << cfg.k;
  if (s.h % f != 0 || s.w % f != 0) {
    throw ConfigError("HBO with " + std::to_string(cfg.k) +
                      " contraction units needs spatial dims divisible by " +
                      std::to_string(f) + ", got " + std::to_string(s.h) + "x" +
                      std::to_string(s.w));
  }
  std::size_t u = 0;
  typename Ops::Value y = x;
  for (int j = 0; j < cfg.k; ++j) y = ops.unit(p.units[u++], y);
  const typename Ops::Value body_in = y;
  if (cfg.has_expansion()) y = ops.unit(p.units[u++], y);
  y = ops.unit(p.units[u++], y);
  y = ops.unit(p.units[u++], y);
  if (cfg.has_residual()) y = ops.add(y, ops.take_first(body_in, cfg.half()));
  const int up = cfg.stride == 1 ? f : f / 2;
  if (up > 1) y = ops.upsample(y, up);
  y = ops.unit(p.units[u++], y);
  typename Ops::Value shortcut = cfg.stride == 1 ? x : ops.avgpool(x, 2, 2);
  shortcut = ops.take_first(shortcut, cfg.half());
  return ops.concat(y, shortcut);
}

template <class Ops>
typename Ops::Value block_forward(Ops& ops, const BlockConfig& cfg, const BlockParams& p,
                                  const typename Ops::Value& x) {
  return cfg.kind == BlockKind::HarmoniousBottleneck ? harmonious_bottleneck(ops, cfg, p, x)
                                                     : inverted_residual(ops, cfg, p, x);
}

// Inference-mode eager forward.
inline Tensor inverted_residual_forward(const Tensor& x, const BlockConfig& cfg,
                                        const BlockParams& p) {
  EagerOps ops;
  return inverted_residual(ops, cfg, p, x);
}

inline Tensor harmonious_bottleneck_forward(const Tensor& x, const BlockConfig& cfg,
                                            const BlockParams& p) {
  EagerOps ops;
  return harmonious_bottleneck(ops, cfg, p, x);
}

// Largest element count among the block's intermediate values (the block
// output itself excluded) for an input of shape in.
inline std::size_t peak_intermediate_elements(const BlockConfig& cfg, const BlockParams& p,
                                              const Shape& in) {
  ShapeOps ops;
  block_forward(ops, cfg, p, in);
  std::size_t peak = 0;
  for (std::size_t i = 0; i + 1 < ops.produced.size(); ++i) {
    peak = std::max(peak, ops.produced[i].numel());
  }
  return peak;
}

}  // namespace hbo
