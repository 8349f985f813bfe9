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
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hbo/autodiff.hpp"
#include "hbo/ops.hpp"
#include "hbo/oracle.hpp"
#include "hbo/units.hpp"

// Execution contexts for the generic block and network code. Each exposes the
// same small vocabulary (unit, upsample, avgpool, concat, take_first, add)
// over its own value type:
//   EagerOps  - tensors, optionally through the naive oracle with MAC counting
//   ShapeOps  - shapes only; records every conv for the cost ledger
//   TapeOps   - autodiff Vars; parameters become tape leaves
namespace hbo {

// Batch statistics observed by a training-mode BN, to be folded into the
// running statistics by the owner of the unit.
struct UnitMoments {
  const ConvUnit* unit = nullptr;
  nn::BatchMoments moments;
  std::size_t count = 0;
};

inline void commit_moments(const std::vector<UnitMoments>& ms,
                           const std::function<ConvUnit&(const ConvUnit*)>& resolve) {
  for (const auto& m : ms) {
    ConvUnit& u = resolve(m.unit);
    nn::update_running_stats(u.bn, m.moments, m.count);
  }
}

class EagerOps {
 public:
  using Value = Tensor;

  struct MacRecord {
    const ConvUnit* unit;
    std::uint64_t macs;
  };

  bool training = false;
  // Route every conv through conv2d_oracle and log its MAC count.
  bool use_oracle = false;
  std::vector<MacRecord> mac_log;
  std::vector<UnitMoments> moments;

  EagerOps() = default;
  EagerOps(bool training_, bool use_oracle_)
      : training(training_), use_oracle(use_oracle_) {}

  static Shape shape_of(const Tensor& v) { return v.shape(); }

  Tensor unit(const ConvUnit& u, const Tensor& x) {
    Tensor y;
    if (use_oracle) {
      MacCounter counter;
      y = conv2d_oracle(x, u.kernel, u.stride, u.pad, &counter);
      mac_log.push_back({&u, counter.macs});
    } else if (u.kernel.is_depthwise()) {
      y = nn::depthwise_conv(x, u.kernel, u.stride);
    } else {
      y = nn::conv2d(x, u.kernel, u.stride, u.pad);
    }
    if (u.has_bias) y = nn::add_channel_bias(y, u.bias);
    if (u.has_bn) {
      if (training) {
        u.bn.validate(y.c());
        const nn::BatchMoments m = nn::batch_moments(y);
        y = nn::batchnorm_apply(y, m.mean, m.var, u.bn.gamma, u.bn.beta, u.bn.eps);
        moments.push_back({&u, m, y.size() / static_cast<std::size_t>(y.c())});
      } else {
        y = nn::batchnorm(y, u.bn);
      }
    }
    if (u.relu6) y = nn::relu6(y);
    return y;
  }

  Tensor upsample(const Tensor& x, int factor) { return nn::bilinear_upsample(x, factor); }
  Tensor avgpool(const Tensor& x, int kernel, int stride) {
    return nn::avgpool(x, kernel, stride);
  }
  Tensor concat(const Tensor& a, const Tensor& b) { return nn::concat_channels(a, b); }
  Tensor take_first(const Tensor& x, int m) { return nn::take_first_channels(x, m); }
  Tensor add(const Tensor& a, const Tensor& b) { return nn::eltadd(a, b); }
};

class ShapeOps {
 public:
  using Value = Shape;

  struct ConvRecord {
    const ConvUnit* unit;
    Shape in;
    Shape out;
  };

  std::vector<ConvRecord> convs;
  // Every value produced, in execution order.
  std::vector<Shape> produced;

  static Shape shape_of(const Shape& s) { return s; }

  Shape unit(const ConvUnit& u, const Shape& x) {
    const ConvKernel& k = u.kernel;
    if (x.c != k.c_in()) {
      throw DimensionError(u.name + ": input has " + std::to_string(x.c) +
                           " channels, kernel expects " + std::to_string(k.c_in()));
    }
    const int ho = conv_out_dim(x.h, k.k_h, u.stride, u.pad);
    const int wo = conv_out_dim(x.w, k.k_w, u.stride, u.pad);
    if (ho < 1 || wo < 1) {
      throw DimensionError(u.name + ": kernel larger than padded input " + to_string(x));
    }
    const Shape y{x.n, k.c_out, ho, wo};
    convs.push_back({&u, x, y});
    return note(y);
  }

  Shape upsample(const Shape& x, int factor) {
    if (factor < 1) throw ArgumentError("upsample factor must be >= 1");
    return note(Shape{x.n, x.c, x.h * factor, x.w * factor});
  }

  Shape avgpool(const Shape& x, int kernel, int stride) {
    if (kernel < 1 || stride < 1) throw ArgumentError("pool kernel and stride must be >= 1");
    if (kernel > x.h || kernel > x.w) {
      throw DimensionError("pool kernel " + std::to_string(kernel) +
                           " larger than input " + to_string(x));
    }
    return note(Shape{x.n, x.c, (x.h - kernel) / stride + 1, (x.w - kernel) / stride + 1});
  }

  Shape concat(const Shape& a, const Shape& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) {
      throw DimensionError("concat of " + to_string(a) + " and " + to_string(b));
    }
    return note(Shape{a.n, a.c + b.c, a.h, a.w});
  }

  Shape take_first(const Shape& x, int m) {
    if (m < 1 || m > x.c) {
      throw DimensionError("cannot take " + std::to_string(m) + " channels of " +
                           to_string(x));
    }
    return note(Shape{x.n, m, x.h, x.w});
  }

  Shape add(const Shape& a, const Shape& b) {
    if (a != b) throw DimensionError("eltadd of " + to_string(a) + " and " + to_string(b));
    return note(a);
  }

 private:
  Shape note(const Shape& s) {
    produced.push_back(s);
    return s;
  }
};

class TapeOps {
 public:
  using Value = ad::Var;

  struct UnitVars {
    ad::Var weight, gamma, beta, bias;
  };

  TapeOps(ad::Tape& tape, bool training) : tape_(tape), training_(training) {}

  ad::Tape& tape() { return tape_; }
  const ad::Tape& tape() const { return tape_; }
  bool training() const { return training_; }
  std::vector<UnitMoments> moments;

  Shape shape_of(ad::Var v) const { return tape_.value(v).shape(); }

  // Supplies externally created Vars for some of a unit's parameters; any
  // invalid Var is created as a leaf on first use.
  void bind(const ConvUnit& u, UnitVars vars) { bound_[&u] = vars; }

  // Vars of every unit touched so far, in first-use order.
  const std::vector<std::pair<const ConvUnit*, UnitVars>>& params() const { return order_; }

  ad::Var unit(const ConvUnit& u, ad::Var x) {
    const UnitVars p = vars(u);
    ad::Var y = ad::conv2d(tape_, x, p.weight, u.kernel.groups, u.stride, u.pad);
    if (u.has_bias) y = ad::add_channel_bias(tape_, y, p.bias);
    if (u.has_bn) {
      if (training_) {
        nn::BatchMoments m;
        y = ad::batchnorm_train(tape_, y, p.gamma, p.beta, u.bn.eps, &m);
        const Tensor& yv = tape_.value(y);
        moments.push_back({&u, std::move(m), yv.size() / static_cast<std::size_t>(yv.c())});
      } else {
        y = ad::batchnorm_eval(tape_, y, p.gamma, p.beta, u.bn.running_mean,
                               u.bn.running_var, u.bn.eps);
      }
    }
    if (u.relu6) y = ad::relu6(tape_, y);
    return y;
  }

  ad::Var upsample(ad::Var x, int factor) { return ad::bilinear_upsample(tape_, x, factor); }
  ad::Var avgpool(ad::Var x, int kernel, int stride) {
    return ad::avgpool(tape_, x, kernel, stride);
  }
  ad::Var concat(ad::Var a, ad::Var b) { return ad::concat_channels(tape_, a, b); }
  ad::Var take_first(ad::Var x, int m) { return ad::take_first_channels(tape_, x, m); }
  ad::Var add(ad::Var a, ad::Var b) { return ad::eltadd(tape_, a, b); }

 private:
  const UnitVars& vars(const ConvUnit& u) {
    auto it = index_.find(&u);
    if (it != index_.end()) return order_[it->second].second;
    UnitVars v;
    if (auto b = bound_.find(&u); b != bound_.end()) v = b->second;
    if (!v.weight.valid()) v.weight = tape_.leaf(u.kernel.as_tensor());
    if (u.has_bn) {
      const auto c = [](const std::vector<double>& d) {
        return Tensor(Shape{1, static_cast<int>(d.size()), 1, 1}, d);
      };
      if (!v.gamma.valid()) v.gamma = tape_.leaf(c(u.bn.gamma));
      if (!v.beta.valid()) v.beta = tape_.leaf(c(u.bn.beta));
    }
    if (u.has_bias && !v.bias.valid()) {
      v.bias = tape_.leaf(Tensor(Shape{1, static_cast<int>(u.bias.size()), 1, 1}, u.bias));
    }
    index_[&u] = order_.size();
    order_.emplace_back(&u, v);
    return order_.back().second;
  }

  ad::Tape& tape_;
  bool training_;
  std::map<const ConvUnit*, UnitVars> bound_;
  std::map<const ConvUnit*, std::size_t> index_;
  std::vector<std::pair<const ConvUnit*, UnitVars>> order_;
};

}  // namespace hbo
