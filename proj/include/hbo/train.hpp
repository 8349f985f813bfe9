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
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hbo/autodiff.hpp"
#include "hbo/exec.hpp"
#include "hbo/network.hpp"

namespace hbo::train {

// base * 0.5 * (1 + cos(pi * epoch / total)).
inline double cosine_lr(int epoch, int total, double base) {
  if (total < 1 || epoch < 0 || epoch >= total) {
    throw ArgumentError("cosine_lr needs 0 <= epoch < total, got epoch " +
                        std::to_string(epoch) + ", total " + std::to_string(total));
  }
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / total));
}

struct OptimizerState {
  double momentum = 0.9;
  double weight_decay = 4e-5;
  double base_lr = 0.05;
  int epochs = 40;
  // One buffer per parameter tensor, created on the first step.
  std::vector<std::vector<double>> buffers;
};

// v <- momentum * v + g + wd * p;  p <- p - lr * v.
inline void sgd_step(const std::vector<std::span<double>>& params,
                     const std::vector<std::span<const double>>& grads, OptimizerState& state,
                     double lr) {
  if (params.size() != grads.size()) {
    throw ContractError("got " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params.size()) + " parameters");
  }
  if (state.buffers.empty()) {
    for (const auto& p : params) state.buffers.emplace_back(p.size(), 0.0);
  }
  if (state.buffers.size() != params.size()) {
    throw ContractError("optimizer state tracks " + std::to_string(state.buffers.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = state.buffers[i];
    if (params[i].size() != grads[i].size() || v.size() != params[i].size()) {
      throw ContractError("shape mismatch for parameter " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    auto g = grads[i];
    auto& v = state.buffers[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = state.momentum * v[k] + g[k] + state.weight_decay * p[k];
      p[k] -= lr * v[k];
    }
  }
}

struct DatasetConfig {
  int samples = 600;
  int classes = 3;
  int size = 32;
  int patch = 16;
  int period = 8;
  double amplitude = 1.0;
  double noise = 0.5;
  std::uint64_t seed = 1;
};

struct Dataset {
  Tensor images;
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }

  // Samples at the given indices, in order.
  std::pair<Tensor, std::vector<int>> gather(std::span<const int> idx) const {
    const Shape s = images.shape();
    Tensor x(Shape{static_cast<int>(idx.size()), s.c, s.h, s.w});
    std::vector<int> y;
    const std::size_t per = static_cast<std::size_t>(s.c) * s.plane();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::copy_n(images.plane(idx[i], 0), per, x.plane(static_cast<int>(i), 0));
      y.push_back(labels[static_cast<std::size_t>(idx[i])]);
    }
    return {std::move(x), std::move(y)};
  }
};

// Stripe value at patch offset (dy, dx) for a class: horizontal, vertical,
// and diagonal square waves of the given period (further classes rotate
// through the anti-diagonal and a checkerboard).
inline double stripe(int cls, int dy, int dx, int period = 8) {
  auto sq = [period](int v) { return ((v % period) + period) % period < period / 2 ? 1.0 : -1.0; };
  switch (cls % 5) {
    case 0: return sq(dy);
    case 1: return sq(dx);
    case 2: return sq(dy + dx);
    case 3: return sq(dy - dx);
    default: return sq(dy) * sq(dx);
  }
}

// 3-channel images of Gaussian noise with one striped patch at a random
// position; the stripe orientation is the class. Classes are balanced.
inline Dataset make_stripes_dataset(const DatasetConfig& cfg) {
  if (cfg.samples < 1 || cfg.classes < 1 || cfg.size < 1 || cfg.patch < 1 ||
      cfg.patch > cfg.size || cfg.period < 2) {
    throw ArgumentError("invalid dataset configuration");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.noise);
  std::uniform_int_distribution<int> pos(0, cfg.size - cfg.patch);
  std::uniform_real_distribution<double> gain(0.6, 1.0);
  Dataset d;
  d.images = Tensor(Shape{cfg.samples, 3, cfg.size, cfg.size});
  for (int i = 0; i < cfg.samples; ++i) {
    const int cls = i % cfg.classes;
    d.labels.push_back(cls);
    const int y0 = pos(rng), x0 = pos(rng);
    double g[3];
    for (double& v : g) v = gain(rng);
    for (int c = 0; c < 3; ++c) {
      double* p = d.images.plane(i, c);
      for (int y = 0; y < cfg.size; ++y)
        for (int x = 0; x < cfg.size; ++x) p[y * cfg.size + x] = noise(rng);
      for (int y = 0; y < cfg.patch; ++y)
        for (int x = 0; x < cfg.patch; ++x) {
          p[(y0 + y) * cfg.size + x0 + x] += cfg.amplitude * g[c] * stripe(cls, y, x, cfg.period);
        }
    }
  }
  return d;
}

struct TrainConfig {
  int epochs = 40;
  int batch_size = 32;
  // Scaled down from 0.05 for the toy network; larger rates diverge early.
  double base_lr = 0.002;
  double momentum = 0.9;
  double weight_decay = 4e-5;
  double label_smoothing = 0.1;
  std::uint64_t seed = 7;
  DatasetConfig data;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainLog {
  // Row 0 evaluates the untrained network; row e > 0 reports the mean
  // training loss of epoch e and the inference-mode train accuracy after it.
  std::vector<EpochLog> rows;

  std::string to_csv() const {
    std::ostringstream os;
    os << "epoch,lr,loss,accuracy\n" << std::setprecision(17);
    for (const auto& r : rows) {
      os << r.epoch << "," << r.lr << "," << r.loss << "," << r.accuracy << "\n";
    }
    return os.str();
  }
  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

// Trailing moving average with the given window (shorter at the start).
inline std::vector<double> moving_average(const std::vector<double>& v, int window) {
  std::vector<double> out;
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += v[i];
    if (i >= static_cast<std::size_t>(window)) s -= v[i - window];
    out.push_back(s / static_cast<double>(std::min<std::size_t>(i + 1, window)));
  }
  return out;
}

// Every trainable tensor of a network, in unit order: weight, gamma, beta,
// bias.
inline std::vector<std::span<double>> parameters(Network& net) {
  std::vector<std::span<double>> out;
  for (ConvUnit* u : net.units()) {
    out.emplace_back(u->kernel.data);
    if (u->has_bn) {
      out.emplace_back(u->bn.gamma);
      out.emplace_back(u->bn.beta);
    }
    if (u->has_bias) out.emplace_back(u->bias);
  }
  return out;
}

// Gradients matching parameters(net) from a tape on which the network ran.
inline std::vector<std::span<const double>> gradients(Network& net, const TapeOps& ops) {
  std::map<const ConvUnit*, TapeOps::UnitVars> vars(ops.params().begin(), ops.params().end());
  const ad::Tape& tape = ops.tape();
  std::vector<std::span<const double>> out;
  for (ConvUnit* u : net.units()) {
    auto it = vars.find(u);
    if (it == vars.end()) throw ContractError("unit " + u->name + " did not run on the tape");
    out.emplace_back(tape.grad(it->second.weight).data());
    if (u->has_bn) {
      out.emplace_back(tape.grad(it->second.gamma).data());
      out.emplace_back(tape.grad(it->second.beta).data());
    }
    if (u->has_bias) out.emplace_back(tape.grad(it->second.bias).data());
  }
  return out;
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Inference-mode loss and accuracy over the whole dataset.
inline EvalResult evaluate(const Network& net, const Dataset& data, double eps,
                           int chunk = 100) {
  EvalResult r;
  std::vector<int> idx(static_cast<std::size_t>(data.size()));
  std::iota(idx.begin(), idx.end(), 0);
  int correct = 0;
  for (int start = 0; start < data.size(); start += chunk) {
    const int n = std::min(chunk, data.size() - start);
    auto [x, y] = data.gather(std::span<const int>(idx).subspan(start, n));
    ad::Tape t;
    const ad::Var z = t.constant(net.forward(x));
    r.loss += t.value(ad::label_smooth_ce(t, z, y, eps))[0] * n;
    const Tensor& zv = t.value(z);
    const int K = zv.c();
    for (int i = 0; i < n; ++i) {
      const double* row = zv.plane(i, 0);
      const int pred = static_cast<int>(std::max_element(row, row + K) - row);
      correct += pred == y[static_cast<std::size_t>(i)];
    }
  }
  r.loss /= data.size();
  r.accuracy = static_cast<double>(correct) / data.size();
  return r;
}

// Minibatch SGD with momentum, weight decay, cosine-decayed learning rate and
// label-smoothed cross-entropy. Deterministic given cfg.seed.
inline TrainLog train(Network& net, const Dataset& data, const TrainConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw ArgumentError("invalid training config");
  OptimizerState state;
  state.momentum = cfg.momentum;
  state.weight_decay = cfg.weight_decay;
  state.base_lr = cfg.base_lr;
  state.epochs = cfg.epochs;
  std::mt19937_64 rng(cfg.seed);
  TrainLog log;
  const EvalResult e0 = evaluate(net, data, cfg.label_smoothing);
  log.rows.push_back({0, cfg.epochs > 0 ? cosine_lr(0, cfg.epochs, cfg.base_lr) : 0.0, e0.loss,
                      e0.accuracy});
  std::vector<int> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg.epochs, cfg.base_lr);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int seen = 0;
    for (int start = 0; start < data.size(); start += cfg.batch_size) {
      const int n = std::min(cfg.batch_size, data.size() - start);
      auto [x, y] = data.gather(std::span<const int>(order).subspan(start, n));
      ad::Tape tape;
      TapeOps ops(tape, true);
      const ad::Var logits = net.run(ops, tape.constant(x));
      const ad::Var loss = ad::label_smooth_ce(tape, logits, y, cfg.label_smoothing);
      const double lv = tape.value(loss)[0];
      if (!std::isfinite(lv)) throw TrainingError("loss is not finite", step);
      tape.backward(loss);
      sgd_step(parameters(net), gradients(net, ops), state, lr);
      net.commit(ops.moments);
      loss_sum += lv * n;
      seen += n;
      ++step;
    }
    const EvalResult e = evaluate(net, data, cfg.label_smoothing);
    log.rows.push_back({epoch + 1, lr, loss_sum / seen, e.accuracy});
  }
  return log;
}

// Toy HBONet: width 0.25, divisor 2, 32x32 input, three classes.
inline NetworkSpec toy_spec(const NetworkSpec& base) {
  NetworkSpec s = base;
  s.width = 0.25;
  s.divisor = 2;
  s.resolution = 32;
  s.num_classes = 3;
  s.validate();
  return s;
}

inline TrainLog train_toy(const NetworkSpec& spec, const TrainConfig& cfg) {
  Network net = build_network(spec, cfg.seed);
  DatasetConfig dc = cfg.data;
  dc.classes = spec.num_classes;
  dc.size = spec.resolution;
  return train(net, make_stripes_dataset(dc), cfg);
}

}  // namespace hbo::train
