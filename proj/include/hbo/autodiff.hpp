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
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hbo/ops.hpp"
#include "hbo/tensor.hpp"

// Reverse-mode differentiation over the nn operation set.
//
// A Tape records every operation applied to Vars in execution order, so the
// node list is topologically sorted by construction. backward() walks it in
// reverse and each node's closure pushes gradient into its inputs.
namespace hbo::ad {

struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const { return id != npos; }
};

class Tape;
using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

class Tape {
 public:
  // A leaf is an input or parameter; gradients are retained for leaves that
  // require them.
  Var leaf(Tensor value, bool requires_grad = true) {
    nodes_.push_back(Node{"leaf", std::move(value), {}, nullptr, requires_grad});
    return Var{nodes_.size() - 1};
  }
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var record(std::string op, Tensor value, std::vector<std::size_t> inputs,
             BackwardFn backward) {
    bool rg = false;
    for (std::size_t in : inputs) rg = rg || nodes_.at(in).requires_grad;
    nodes_.push_back(Node{std::move(op), std::move(value), std::move(inputs),
                          rg ? std::move(backward) : nullptr, rg});
    return Var{nodes_.size() - 1};
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::string& op(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient of the last backward() loss with respect to v. Zeros if v did
  // not influence the loss.
  const Tensor& grad(Var v) const {
    const Tensor& value = nodes_.at(v.id).value;
    if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
    if (grads_[v.id].empty()) grads_[v.id] = Tensor(value.shape());
    return grads_[v.id];
  }

  void accumulate(std::size_t id, const Tensor& g) {
    if (!nodes_.at(id).requires_grad) return;
    Tensor& dst = grads_.at(id);
    if (dst.empty()) {
      dst = g;
      return;
    }
    if (dst.shape() != g.shape()) {
      throw ContractError("gradient shape " + to_string(g.shape()) +
                          " does not match value shape " +
                          to_string(dst.shape()));
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
  }

  // Fills gradients of every node reachable backwards from loss. Nodes are
  // visited in reverse recording order and their inputs accumulated in
  // argument order, so the result is deterministic.
  void backward(Var loss) {
    const Tensor& lv = value(loss);
    if (lv.size() != 1) {
      throw ContractError("backward needs a scalar loss, got shape " +
                          to_string(lv.shape()));
    }
    grads_.assign(nodes_.size(), Tensor());
    if (!nodes_[loss.id].requires_grad) return;
    grads_[loss.id] = Tensor(lv.shape(), 1.0);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& node = nodes_[id];
      if (!node.backward || grads_[id].empty()) continue;
      const Tensor g = grads_[id];
      node.backward(*this, g);
    }
  }

 private:
  struct Node {
    std::string op;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  mutable std::vector<Tensor> grads_;
};

namespace detail {

inline ConvKernel kernel_from(const Tensor& w, int groups) {
  ConvKernel k(w.n(), w.c(), w.h(), w.w(), groups);
  std::copy(w.data().begin(), w.data().end(), k.data.begin());
  return k;
}

inline Tensor tensor_from(const ConvKernel& k) { return k.as_tensor(); }

inline Tensor channel_tensor(const std::vector<double>& v) {
  return Tensor(Shape{1, static_cast<int>(v.size()), 1, 1}, v);
}

}  // namespace detail

// Grouped convolution. w holds (c_out, c_in / groups, k_h, k_w).
inline Var conv2d(Tape& t, Var x, Var w, int groups, int stride, int pad) {
  const ConvKernel k = detail::kernel_from(t.value(w), groups);
  Tensor y = nn::conv2d(t.value(x), k, stride, pad);
  return t.record("conv2d", std::move(y), {x.id, w.id},
                  [x, w, groups, stride, pad](Tape& tp, const Tensor& g) {
                    const ConvKernel k = detail::kernel_from(tp.value(w), groups);
                    if (tp.requires_grad(x)) {
                      tp.accumulate(x.id, nn::conv2d_backward_input(
                                              g, k, tp.value(x).shape(), stride, pad));
                    }
                    if (tp.requires_grad(w)) {
                      tp.accumulate(w.id, detail::tensor_from(nn::conv2d_backward_weight(
                                              g, tp.value(x), k, stride, pad)));
                    }
                  });
}

// Batch-statistics normalization with affine gamma/beta of shape (1, C, 1, 1).
// The batch moments are written to moments_out when given, so the caller can
// fold them into running statistics.
inline Var batchnorm_train(Tape& t, Var x, Var gamma, Var beta, double eps,
                           nn::BatchMoments* moments_out = nullptr) {
  const Tensor& xv = t.value(x);
  const nn::BatchMoments m = nn::batch_moments(xv);
  Tensor y = nn::batchnorm_apply(xv, m.mean, m.var, t.value(gamma).data(),
                                 t.value(beta).data(), eps);
  if (moments_out != nullptr) *moments_out = m;
  return t.record("batchnorm_train", std::move(y), {x.id, gamma.id, beta.id},
                  [x, gamma, beta, eps](Tape& tp, const Tensor& g) {
                    auto r = nn::batchnorm_train_backward(
                        g, tp.value(x), tp.value(gamma).data(), eps);
                    tp.accumulate(x.id, r.dx);
                    tp.accumulate(gamma.id, detail::channel_tensor(r.dgamma));
                    tp.accumulate(beta.id, detail::channel_tensor(r.dbeta));
                  });
}

// Running-statistics normalization; the statistics are constants.
inline Var batchnorm_eval(Tape& t, Var x, Var gamma, Var beta,
                          std::vector<double> running_mean,
                          std::vector<double> running_var, double eps) {
  nn::BatchNormParams p;
  p.gamma.assign(t.value(gamma).data().begin(), t.value(gamma).data().end());
  p.beta.assign(t.value(beta).data().begin(), t.value(beta).data().end());
  p.running_mean = std::move(running_mean);
  p.running_var = std::move(running_var);
  p.eps = eps;
  Tensor y = nn::batchnorm(t.value(x), static_cast<const nn::BatchNormParams&>(p));
  return t.record("batchnorm_eval", std::move(y), {x.id, gamma.id, beta.id},
                  [x, gamma, beta, p](Tape& tp, const Tensor& g) {
                    nn::BatchNormParams q = p;
                    q.gamma.assign(tp.value(gamma).data().begin(),
                                   tp.value(gamma).data().end());
                    auto r = nn::batchnorm_eval_backward(g, tp.value(x), q);
                    tp.accumulate(x.id, r.dx);
                    tp.accumulate(gamma.id, detail::channel_tensor(r.dgamma));
                    tp.accumulate(beta.id, detail::channel_tensor(r.dbeta));
                  });
}

inline Var relu6(Tape& t, Var x) {
  return t.record("relu6", nn::relu6(t.value(x)), {x.id},
                  [x](Tape& tp, const Tensor& g) {
                    tp.accumulate(x.id, nn::relu6_backward(g, tp.value(x)));
                  });
}

inline Var bilinear_upsample(Tape& t, Var x, int factor) {
  return t.record("bilinear_upsample", nn::bilinear_upsample(t.value(x), factor),
                  {x.id}, [x, factor](Tape& tp, const Tensor& g) {
                    tp.accumulate(x.id, nn::bilinear_upsample_backward(
                                            g, tp.value(x).shape(), factor));
                  });
}

inline Var avgpool(Tape& t, Var x, int kernel, int stride) {
  return t.record("avgpool", nn::avgpool(t.value(x), kernel, stride), {x.id},
                  [x, kernel, stride](Tape& tp, const Tensor& g) {
                    tp.accumulate(x.id, nn::avgpool_backward(
                                            g, tp.value(x).shape(), kernel, stride));
                  });
}

inline Var concat_channels(Tape& t, Var a, Var b) {
  const int ca = t.value(a).c();
  const int cb = t.value(b).c();
  return t.record("concat", nn::concat_channels(t.value(a), t.value(b)),
                  {a.id, b.id}, [a, b, ca, cb](Tape& tp, const Tensor& g) {
                    if (tp.requires_grad(a)) tp.accumulate(a.id, nn::slice_channels(g, 0, ca));
                    if (tp.requires_grad(b)) tp.accumulate(b.id, nn::slice_channels(g, ca, cb));
                  });
}

// Dropped channels receive zero gradient.
inline Var take_first_channels(Tape& t, Var x, int m) {
  return t.record("take_first", nn::take_first_channels(t.value(x), m), {x.id},
                  [x, m](Tape& tp, const Tensor& g) {
                    const Tensor& xv = tp.value(x);
                    Tensor gx(xv.shape());
                    const std::size_t block = static_cast<std::size_t>(m) * xv.shape().plane();
                    for (int i = 0; i < xv.n(); ++i) {
                      std::copy_n(g.plane(i, 0), block, gx.plane(i, 0));
                    }
                    tp.accumulate(x.id, gx);
                  });
}

inline Var eltadd(Tape& t, Var a, Var b) {
  return t.record("eltadd", nn::eltadd(t.value(a), t.value(b)), {a.id, b.id},
                  [a, b](Tape& tp, const Tensor& g) {
                    tp.accumulate(a.id, g);
                    tp.accumulate(b.id, g);
                  });
}

// bias has shape (1, C, 1, 1).
inline Var add_channel_bias(Tape& t, Var x, Var bias) {
  return t.record("add_bias", nn::add_channel_bias(t.value(x), t.value(bias).data()),
                  {x.id, bias.id}, [x, bias](Tape& tp, const Tensor& g) {
                    tp.accumulate(x.id, g);
                    Tensor gb(tp.value(bias).shape());
                    const std::size_t P = g.shape().plane();
                    for (int i = 0; i < g.n(); ++i) {
                      for (int c = 0; c < g.c(); ++c) {
                        const double* p = g.plane(i, c);
                        for (std::size_t k = 0; k < P; ++k) gb[c] += p[k];
                      }
                    }
                    tp.accumulate(bias.id, gb);
                  });
}

inline Var sum(Tape& t, Var x) {
  const auto& v = t.value(x).data();
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  return t.record("sum", Tensor(Shape{1, 1, 1, 1}, s), {x.id},
                  [x](Tape& tp, const Tensor& g) {
                    tp.accumulate(x.id, Tensor(tp.value(x).shape(), g[0]));
                  });
}

inline Var scale(Tape& t, Var x, double alpha) {
  Tensor y = t.value(x);
  for (double& v : y.data()) v *= alpha;
  return t.record("scale", std::move(y), {x.id},
                  [x, alpha](Tape& tp, const Tensor& g) {
                    Tensor gx = g;
                    for (double& v : gx.data()) v *= alpha;
                    tp.accumulate(x.id, gx);
                  });
}

// Elementwise product of equally shaped tensors.
inline Var mul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.shape() != bv.shape()) {
    throw DimensionError("mul needs identical shapes: " + to_string(av.shape()) +
                         " vs " + to_string(bv.shape()));
  }
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return t.record("mul", std::move(y), {a.id, b.id},
                  [a, b](Tape& tp, const Tensor& g) {
                    Tensor ga = g, gb = g;
                    const Tensor& av2 = tp.value(a);
                    const Tensor& bv2 = tp.value(b);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      ga[i] *= bv2[i];
                      gb[i] *= av2[i];
                    }
                    tp.accumulate(a.id, ga);
                    tp.accumulate(b.id, gb);
                  });
}

// Softmax probabilities of logits (n, K, 1, 1), row by row.
inline std::vector<double> softmax_rows(const Tensor& logits) {
  const int n = logits.n();
  const int K = static_cast<int>(logits.size() / static_cast<std::size_t>(n));
  std::vector<double> p(logits.size());
  for (int i = 0; i < n; ++i) {
    const double* z = logits.data().data() + static_cast<std::size_t>(i) * K;
    const double mx = *std::max_element(z, z + K);
    double s = 0.0;
    for (int k = 0; k < K; ++k) s += std::exp(z[k] - mx);
    for (int k = 0; k < K; ++k) {
      p[static_cast<std::size_t>(i) * K + k] = std::exp(z[k] - mx) / s;
    }
  }
  return p;
}

// Mean over the batch of cross-entropy against the smoothed target
// (1 - eps) * onehot(label) + eps / K.
inline Var label_smooth_ce(Tape& t, Var logits, std::vector<int> labels,
                           double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw ArgumentError("label smoothing eps must be in [0, 1)");
  const Tensor& z = t.value(logits);
  const int n = z.n();
  if (labels.size() != static_cast<std::size_t>(n)) {
    throw DataError("got " + std::to_string(labels.size()) + " labels for batch of " +
                    std::to_string(n));
  }
  const int K = static_cast<int>(z.size() / static_cast<std::size_t>(n));
  for (int l : labels) {
    if (l < 0 || l >= K) {
      throw DataError("label " + std::to_string(l) + " out of range [0, " +
                      std::to_string(K) + ")");
    }
  }
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* zi = z.data().data() + static_cast<std::size_t>(i) * K;
    const double mx = *std::max_element(zi, zi + K);
    double s = 0.0;
    for (int k = 0; k < K; ++k) s += std::exp(zi[k] - mx);
    const double lse = mx + std::log(s);
    for (int k = 0; k < K; ++k) {
      const double target = (k == labels[i] ? 1.0 - eps : 0.0) + eps / K;
      loss -= target * (zi[k] - lse);
    }
  }
  loss /= n;
  return t.record("label_smooth_ce", Tensor(Shape{1, 1, 1, 1}, loss), {logits.id},
                  [logits, labels = std::move(labels), eps, n, K](Tape& tp,
                                                                 const Tensor& g) {
                    const Tensor& zv = tp.value(logits);
                    const std::vector<double> p = softmax_rows(zv);
                    Tensor gz(zv.shape());
                    for (int i = 0; i < n; ++i) {
                      for (int k = 0; k < K; ++k) {
                        const std::size_t idx = static_cast<std::size_t>(i) * K + k;
                        const double target = (k == labels[i] ? 1.0 - eps : 0.0) + eps / K;
                        gz[idx] = g[0] * (p[idx] - target) / n;
                      }
                    }
                    tp.accumulate(logits.id, gz);
                  });
}

// Scalar function of one tensor, expressed on a tape so it can be both
// evaluated and differentiated.
using ScalarFn = std::function<Var(Tape&, Var)>;

inline double evaluate(const ScalarFn& f, const Tensor& x) {
  Tape t;
  const Var out = f(t, t.constant(x));
  const Tensor& v = t.value(out);
  if (v.size() != 1) throw ContractError("function is not scalar-valued");
  return v[0];
}

inline Tensor gradient(const ScalarFn& f, const Tensor& x) {
  Tape t;
  const Var in = t.leaf(x);
  t.backward(f(t, in));
  return t.grad(in);
}

struct GradCheckOptions {
  double step = 1e-6;
  std::size_t max_coords = 200;
  std::uint64_t seed = 0x5eed;
  // Denominator floor: |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-3;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_index = 0;
};

// Compares the tape gradient of f at x against central differences
// (f(x + h e_i) - f(x - h e_i)) / 2h. Tensors larger than max_coords are
// checked on a seeded random subset of coordinates.
inline GradCheckReport finite_diff_check(const ScalarFn& f, const Tensor& x,
                                         const GradCheckOptions& opt = {}) {
  if (!(opt.step > 0.0)) throw ArgumentError("finite-difference step must be > 0");
  const Tensor analytic = gradient(f, x);
  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (coords.size() > opt.max_coords) {
    std::mt19937_64 rng(opt.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(opt.max_coords);
    std::sort(coords.begin(), coords.end());
  }
  GradCheckReport r;
  Tensor probe = x;
  for (std::size_t i : coords) {
    const double orig = probe[i];
    probe[i] = orig + opt.step;
    const double fp = evaluate(f, probe);
    probe[i] = orig - opt.step;
    const double fm = evaluate(f, probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * opt.step);
    const double a = analytic[i];
    const double abs_err = std::abs(a - numeric);
    const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), opt.floor});
    if (rel > r.max_rel_error) {
      r.max_rel_error = rel;
      r.worst_index = i;
    }
    r.max_abs_error = std::max(r.max_abs_error, abs_err);
    ++r.coords_checked;
  }
  return r;
}

inline GradCheckReport finite_diff_check(const ScalarFn& f, const Tensor& x,
                                         double step) {
  GradCheckOptions opt;
  opt.step = step;
  return finite_diff_check(f, x, opt);
}

}  // namespace hbo::ad
