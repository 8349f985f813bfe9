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
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hbo/autodiff.hpp"
#include "hbo/blocks.hpp"
#include "hbo/exec.hpp"

// Central finite-difference suites over every differentiable op and over
// whole blocks, shared by the command-line tool and the acceptance run.
namespace hbo::gradcheck {

struct CheckResult {
  std::string name;
  ad::GradCheckReport report;
};

inline Tensor uniform(const Shape& s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(s);
  for (double& v : t.data()) v = d(rng);
  return t;
}

// Weights ~ N(0, 0.25), gamma and running variance in [0.5, 1.5], beta and
// running mean in [-0.3, 0.3].
inline void randomize(BlockParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> w(0.0, 0.5);
  std::uniform_real_distribution<double> u(0.5, 1.5), b(-0.3, 0.3);
  for (auto& unit : p.units) {
    for (double& v : unit.kernel.data) v = w(rng);
    for (std::size_t c = 0; c < unit.bn.gamma.size(); ++c) {
      unit.bn.gamma[c] = u(rng);
      unit.bn.beta[c] = b(rng);
      unit.bn.running_mean[c] = b(rng);
      unit.bn.running_var[c] = u(rng);
    }
  }
}

// sum(y * W) with W a fixed random tensor shaped like y. A plain sum would
// make batch-normalized outputs constant.
inline ad::Var weighted_sum(ad::Tape& t, ad::Var y, std::uint64_t seed) {
  return ad::sum(t, ad::mul(t, y, t.constant(uniform(t.value(y).shape(), seed))));
}

namespace detail {

// One input of a multi-input op varies; the others stay at fixed values.
using MultiFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

inline void check_each(std::vector<CheckResult>& out, const std::string& name,
                       const std::vector<Tensor>& inputs, const MultiFn& op,
                       std::uint64_t seed, const ad::GradCheckOptions& opts) {
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const ad::ScalarFn f = [&](ad::Tape& t, ad::Var v) {
      std::vector<ad::Var> vars;
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        vars.push_back(j == i ? v : t.constant(inputs[j]));
      }
      return weighted_sum(t, op(t, vars), seed);
    };
    const std::string label = inputs.size() == 1 ? name : name + "[" + std::to_string(i) + "]";
    out.push_back({label, ad::finite_diff_check(f, inputs[i], opts)});
  }
}

}  // namespace detail

inline std::vector<CheckResult> check_ops(std::uint64_t seed = 1,
                                          const ad::GradCheckOptions& opts = {}) {
  std::vector<CheckResult> out;
  auto in = [&](const Shape& s, std::uint64_t k, double lo = -1.0, double hi = 1.0) {
    return uniform(s, seed * 1000 + k, lo, hi);
  };
  using V = std::vector<ad::Var>;
  auto conv = [](int groups, int stride, int pad) {
    return [=](ad::Tape& t, const V& v) { return ad::conv2d(t, v[0], v[1], groups, stride, pad); };
  };
  detail::check_each(out, "conv2d 3x3 s1", {in({2, 3, 5, 5}, 1), in({4, 3, 3, 3}, 2)},
                     conv(1, 1, 1), seed, opts);
  detail::check_each(out, "conv2d 3x3 s2", {in({2, 3, 6, 6}, 3), in({4, 3, 3, 3}, 4)},
                     conv(1, 2, 1), seed, opts);
  detail::check_each(out, "depthwise 3x3 s2", {in({2, 4, 6, 6}, 5), in({4, 1, 3, 3}, 6)},
                     conv(4, 2, 1), seed, opts);
  detail::check_each(out, "depthwise 5x5 s1", {in({2, 3, 4, 4}, 7), in({3, 1, 5, 5}, 8)},
                     conv(3, 1, 2), seed, opts);
  detail::check_each(out, "pointwise", {in({2, 5, 3, 3}, 9), in({4, 5, 1, 1}, 10)},
                     conv(1, 1, 0), seed, opts);
  detail::check_each(out, "grouped 3x3", {in({2, 4, 4, 4}, 11), in({6, 2, 3, 3}, 12)},
                     conv(2, 1, 1), seed, opts);
  const Tensor bx = in({4, 3, 3, 3}, 13), bg = in({1, 3, 1, 1}, 14, 0.5, 1.5),
               bb = in({1, 3, 1, 1}, 15);
  detail::check_each(
      out, "batchnorm train", {bx, bg, bb},
      [](ad::Tape& t, const V& v) { return ad::batchnorm_train(t, v[0], v[1], v[2], 1e-5); },
      seed, opts);
  detail::check_each(
      out, "batchnorm eval", {bx, bg, bb},
      [](ad::Tape& t, const V& v) {
        return ad::batchnorm_eval(t, v[0], v[1], v[2], {0.1, -0.2, 0.0}, {0.9, 1.2, 0.7}, 1e-5);
      },
      seed, opts);
  detail::check_each(
      out, "relu6", {in({2, 3, 4, 4}, 16, -2.0, 8.0)},
      [](ad::Tape& t, const V& v) { return ad::relu6(t, v[0]); }, seed, opts);
  for (int f : {2, 4}) {
    detail::check_each(
        out, "bilinear x" + std::to_string(f), {in({2, 2, 3, 3}, 17)},
        [f](ad::Tape& t, const V& v) { return ad::bilinear_upsample(t, v[0], f); }, seed, opts);
  }
  detail::check_each(
      out, "avgpool 2x2 s2", {in({2, 3, 4, 4}, 18)},
      [](ad::Tape& t, const V& v) { return ad::avgpool(t, v[0], 2, 2); }, seed, opts);
  detail::check_each(
      out, "concat", {in({2, 2, 3, 3}, 19), in({2, 3, 3, 3}, 20)},
      [](ad::Tape& t, const V& v) { return ad::concat_channels(t, v[0], v[1]); }, seed, opts);
  detail::check_each(
      out, "take_first", {in({2, 5, 3, 3}, 21)},
      [](ad::Tape& t, const V& v) { return ad::take_first_channels(t, v[0], 2); }, seed, opts);
  detail::check_each(
      out, "eltadd", {in({2, 3, 3, 3}, 22), in({2, 3, 3, 3}, 23)},
      [](ad::Tape& t, const V& v) { return ad::eltadd(t, v[0], v[1]); }, seed, opts);
  detail::check_each(
      out, "channel bias", {in({2, 3, 2, 2}, 24), in({1, 3, 1, 1}, 25)},
      [](ad::Tape& t, const V& v) { return ad::add_channel_bias(t, v[0], v[1]); }, seed, opts);
  detail::check_each(
      out, "mul", {in({2, 3, 2, 2}, 26), in({2, 3, 2, 2}, 27)},
      [](ad::Tape& t, const V& v) { return ad::mul(t, v[0], v[1]); }, seed, opts);
  detail::check_each(
      out, "scale", {in({2, 3, 2, 2}, 28)},
      [](ad::Tape& t, const V& v) { return ad::scale(t, v[0], -1.5); }, seed, opts);
  const ad::ScalarFn ce = [](ad::Tape& t, ad::Var z) {
    return ad::label_smooth_ce(t, z, {0, 2, 1, 2}, 0.1);
  };
  out.push_back({"label_smooth_ce", ad::finite_diff_check(ce, in({4, 3, 1, 1}, 29, -2.0, 2.0),
                                                          opts)});
  return out;
}

// Input, weight, gamma and beta gradients of one block under a weighted-sum
// loss, with batch or running statistics.
inline std::vector<CheckResult> check_block(const BlockConfig& cfg, const Shape& in,
                                            bool training, std::uint64_t seed,
                                            const ad::GradCheckOptions& opts = {}) {
  BlockParams p = make_block_params(cfg);
  randomize(p, seed);
  const Tensor x = uniform(in, seed + 1);
  const auto loss = [&](ad::Tape& t, TapeOps& ops, ad::Var xv) {
    return weighted_sum(t, block_forward(ops, cfg, p, xv), seed + 2);
  };
  std::vector<CheckResult> out;
  const ad::ScalarFn wrt_x = [&](ad::Tape& t, ad::Var v) {
    TapeOps ops(t, training);
    return loss(t, ops, v);
  };
  out.push_back({"input", ad::finite_diff_check(wrt_x, x, opts)});
  for (const ConvUnit& u : p.units) {
    static constexpr const char* kWhat[] = {"weight", "gamma", "beta"};
    for (int which = 0; which < (u.has_bn ? 3 : 1); ++which) {
      const Tensor value = which == 0 ? u.kernel.as_tensor()
                                      : Tensor(Shape{1, u.kernel.c_out, 1, 1},
                                               which == 1 ? u.bn.gamma : u.bn.beta);
      const ad::ScalarFn f = [&](ad::Tape& t, ad::Var v) {
        TapeOps ops(t, training);
        TapeOps::UnitVars vars;
        (which == 0 ? vars.weight : which == 1 ? vars.gamma : vars.beta) = v;
        ops.bind(u, vars);
        return loss(t, ops, t.constant(x));
      };
      out.push_back({u.name + " " + kWhat[which], ad::finite_diff_check(f, value, opts)});
    }
  }
  return out;
}

struct BlockCase {
  std::string name;
  BlockConfig cfg;
  Shape input;
  bool training;
};

inline std::vector<BlockCase> standard_block_cases() {
  auto make = [](BlockKind kind, int c_in, int c_out, double t, int stride, int k) {
    BlockConfig c;
    c.kind = kind;
    c.c_in = c_in;
    c.c_out = c_out;
    c.t = t;
    c.stride = stride;
    c.k = k;
    c.body_kernel = kind == BlockKind::HarmoniousBottleneck ? 5 : 3;
    return c;
  };
  const auto H = BlockKind::HarmoniousBottleneck;
  const auto I = BlockKind::InvertedResidual;
  return {
      {"hbo stride 1 inference", make(H, 4, 4, 2, 1, 1), {2, 4, 6, 6}, false},
      {"hbo stride 1 training", make(H, 4, 4, 2, 1, 1), {4, 4, 6, 6}, true},
      {"hbo stride 2 inference", make(H, 4, 6, 2, 2, 1), {2, 4, 8, 8}, false},
      {"hbo stride 2 training", make(H, 4, 6, 2, 2, 1), {4, 4, 8, 8}, true},
      {"hbo cascade k=2 training", make(H, 4, 4, 2, 1, 2), {4, 4, 4, 4}, true},
      {"inverted residual stride 1 training", make(I, 4, 4, 2, 1, 1), {4, 4, 5, 5}, true},
      {"inverted residual stride 2 training", make(I, 4, 6, 3, 2, 1), {4, 4, 6, 6}, true},
  };
}

inline double worst(const std::vector<CheckResult>& rs) {
  double w = 0.0;
  for (const auto& r : rs) w = std::max(w, r.report.max_rel_error);
  return w;
}

}  // namespace hbo::gradcheck
