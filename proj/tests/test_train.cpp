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


#include <cmath>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "hbo/presets.hpp"
#include "hbo/train.hpp"

namespace hbo::train {
namespace {

TEST(CosineLr, Examples) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 40, 0.05), 0.05);
  EXPECT_NEAR(cosine_lr(20, 40, 0.05), 0.025, 1e-15);
  EXPECT_NEAR(cosine_lr(9999, 10000, 1.0), 0.0, 1e-6);
  EXPECT_THROW(cosine_lr(40, 40, 0.05), ArgumentError);
  EXPECT_THROW(cosine_lr(-1, 40, 0.05), ArgumentError);
}

TEST(SgdStep, ZeroGradientLeavesParams) {
  std::vector<double> p = {1.0, -2.0};
  const std::vector<double> g = {0.0, 0.0};
  OptimizerState s;
  s.weight_decay = 0.0;
  sgd_step({std::span<double>(p)}, {std::span<const double>(g)}, s, 0.1);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(SgdStep, SingleScalar) {
  std::vector<double> p = {0.5};
  const std::vector<double> g = {1.0};
  OptimizerState s;
  s.weight_decay = 0.0;
  sgd_step({std::span<double>(p)}, {std::span<const double>(g)}, s, 0.1);
  EXPECT_DOUBLE_EQ(p[0], 0.4);
  sgd_step({std::span<double>(p)}, {std::span<const double>(g)}, s, 0.1);
  // v = 0.9 * 1 + 1
  EXPECT_DOUBLE_EQ(p[0], 0.4 - 0.19);
}

TEST(SgdStep, ShapeMismatch) {
  std::vector<double> p = {1.0, 2.0};
  const std::vector<double> g = {1.0};
  OptimizerState s;
  EXPECT_THROW(sgd_step({std::span<double>(p)}, {std::span<const double>(g)}, s, 0.1),
               ContractError);
  EXPECT_THROW(sgd_step({std::span<double>(p)}, {}, s, 0.1), ContractError);
}

TEST(SgdStep, WeightDecayShrinksNorm) {
  std::vector<double> p = {3.0, -4.0};
  const std::vector<double> g = {0.0, 0.0};
  OptimizerState s;
  s.weight_decay = 0.01;
  const double lr = 0.1, m = s.momentum, wd = s.weight_decay;
  // Closed form for each coordinate: v' = m v + wd p, p' = p - lr v'.
  double pv = 1.0, vv = 0.0;
  for (int i = 0; i < 10; ++i) {
    sgd_step({std::span<double>(p)}, {std::span<const double>(g)}, s, lr);
    vv = m * vv + wd * pv;
    pv -= lr * vv;
  }
  EXPECT_NEAR(p[0], 3.0 * pv, 1e-15);
  EXPECT_NEAR(p[1], -4.0 * pv, 1e-15);
  EXPECT_LT(std::hypot(p[0], p[1]), 5.0);
}

TEST(LabelSmoothing, UniformLogitsGiveLogK) {
  for (double eps : {0.0, 0.1, 0.5}) {
    ad::Tape t;
    const ad::Var z = t.constant(Tensor({2, 4, 1, 1}));
    EXPECT_NEAR(t.value(ad::label_smooth_ce(t, z, {0, 3}, eps))[0], std::log(4.0), 1e-14);
  }
}

TEST(Dataset, BalancedAndSeeded) {
  DatasetConfig c;
  const Dataset a = make_stripes_dataset(c), b = make_stripes_dataset(c);
  EXPECT_EQ(a.size(), 600);
  EXPECT_EQ(a.images.shape(), (Shape{600, 3, 32, 32}));
  int counts[3] = {};
  for (int l : a.labels) ++counts[l];
  EXPECT_EQ(counts[0], 200);
  EXPECT_EQ(counts[2], 200);
  EXPECT_TRUE(std::equal(a.images.data().begin(), a.images.data().end(), b.images.data().begin()));
  c.seed = 2;
  const Dataset d = make_stripes_dataset(c);
  EXPECT_FALSE(std::equal(a.images.data().begin(), a.images.data().end(), d.images.data().begin()));
  c.patch = 40;
  EXPECT_THROW(make_stripes_dataset(c), ArgumentError);
}

TEST(Dataset, StripesDifferByClass) {
  int diff01 = 0, diff02 = 0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      diff01 += stripe(0, y, x) != stripe(1, y, x);
      diff02 += stripe(0, y, x) != stripe(2, y, x);
    }
  EXPECT_GT(diff01, 0);
  EXPECT_GT(diff02, 0);
}

TEST(MovingAverage, Window) {
  const auto m = moving_average({1, 2, 3, 4, 5, 6}, 3);
  EXPECT_DOUBLE_EQ(m[0], 1.0);
  EXPECT_DOUBLE_EQ(m[1], 1.5);
  EXPECT_DOUBLE_EQ(m[2], 2.0);
  EXPECT_DOUBLE_EQ(m[5], 5.0);
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 1;
  c.data.samples = 64;
  return c;
}

TEST(Train, ZeroEpochsIsChance) {
  TrainConfig c = small_config();
  c.epochs = 0;
  c.data.samples = 600;
  const TrainLog log = train_toy(toy_spec(presets::hbonet()), c);
  ASSERT_EQ(log.rows.size(), 1u);
  EXPECT_NEAR(log.rows[0].accuracy, 1.0 / 3.0, 0.05);
}

TEST(Train, SameSeedSameLog) {
  const TrainConfig c = small_config();
  const NetworkSpec spec = toy_spec(presets::hbonet());
  const TrainLog a = train_toy(spec, c), b = train_toy(spec, c);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.to_csv(), b.to_csv());
  EXPECT_EQ(a.to_csv().rfind("epoch,lr,loss,accuracy\n0,", 0), 0u);
}

TEST(Train, TenStepsAreBitwiseReproducible) {
  const NetworkSpec spec = toy_spec(presets::hbonet());
  TrainConfig c = small_config();
  c.data.samples = 80;
  c.batch_size = 8;
  Network a = build_network(spec, 1), b = build_network(spec, 1);
  const Dataset d = make_stripes_dataset(c.data);
  train(a, d, c);
  train(b, d, c);
  const auto ua = a.units(), ub = b.units();
  for (std::size_t i = 0; i < ua.size(); ++i) {
    EXPECT_EQ(ua[i]->kernel.data, ub[i]->kernel.data) << ua[i]->name;
    EXPECT_EQ(ua[i]->bn.running_mean, ub[i]->bn.running_mean) << ua[i]->name;
  }
}

TEST(Train, GradientsPairWithParameters) {
  Network net = build_network(toy_spec(presets::hbonet()), 2);
  const Dataset d = make_stripes_dataset({.samples = 4});
  ad::Tape tape;
  TapeOps ops(tape, true);
  const ad::Var z = net.run(ops, tape.constant(d.images));
  tape.backward(ad::label_smooth_ce(tape, z, d.labels, 0.1));
  const auto p = parameters(net);
  const auto g = gradients(net, ops);
  ASSERT_EQ(p.size(), g.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i].size(), g[i].size());
}

TEST(Train, NonFiniteLossReportsStep) {
  Network net = build_network(toy_spec(presets::hbonet()), 2);
  net.units().back()->kernel.data[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig c = small_config();
  try {
    train(net, make_stripes_dataset(c.data), c);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.step(), 0u);
  }
}

TEST(Train, RejectsBadConfig) {
  Network net = build_network(toy_spec(presets::hbonet()), 2);
  TrainConfig c = small_config();
  c.batch_size = 0;
  EXPECT_THROW(train(net, make_stripes_dataset(c.data), c), ArgumentError);
}

}  // namespace
}  // namespace hbo::train
