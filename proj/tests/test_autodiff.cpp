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

#include <gtest/gtest.h>

#include "hbo/autodiff.hpp"
#include "test_util.hpp"

namespace hbo::ad {
namespace {

using hbo::testing::dot;
using hbo::testing::random_kernel;
using hbo::testing::random_tensor;

// Random-weighted sum, so no gradient is trivially zero by symmetry.
Var weighted_sum(Tape& t, Var y, std::uint64_t seed = 77) {
  return sum(t, mul(t, y, t.constant(random_tensor(t.value(y).shape(), seed))));
}

double rel_err(const ScalarFn& f, const Tensor& x) {
  return finite_diff_check(f, x, 1e-6).max_rel_error;
}

constexpr double kTol = 1e-5;

TEST(Tape, SumGradientIsOnes) {
  Tape t;
  const Var x = t.leaf(random_tensor(Shape{2, 3, 2, 2}, 1));
  t.backward(sum(t, x));
  for (double g : t.grad(x).data()) EXPECT_EQ(g, 1.0);
}

TEST(Tape, Relu6PiecewiseGradient) {
  Tape t;
  const Var x = t.leaf(Tensor(Shape{1, 1, 1, 5}, std::vector<double>{-2.0, 0.5, 3.0, 5.9, 7.0}));
  t.backward(sum(t, relu6(t, x)));
  const Tensor g = t.grad(x);
  const double expect[5] = {0.0, 1.0, 1.0, 1.0, 0.0};
  for (int i = 0; i < 5; ++i) EXPECT_EQ(g[i], expect[i]);
}

TEST(Tape, KinksHaveZeroSubgradient) {
  Tape t;
  const Var x = t.leaf(Tensor(Shape{1, 1, 1, 2}, std::vector<double>{0.0, 6.0}));
  t.backward(sum(t, relu6(t, x)));
  EXPECT_EQ(t.grad(x)[0], 0.0);
  EXPECT_EQ(t.grad(x)[1], 0.0);
}

TEST(Tape, NonScalarLossThrows) {
  Tape t;
  const Var x = t.leaf(Tensor(Shape{1, 2, 1, 1}));
  EXPECT_THROW(t.backward(x), ContractError);
}

TEST(Tape, NodesAreTopologicallyOrdered) {
  Tape t;
  const Var a = t.leaf(random_tensor(Shape{1, 2, 2, 2}, 2));
  const Var b = relu6(t, a);
  const Var c = eltadd(t, a, b);
  const Var l = sum(t, c);
  EXPECT_LT(a.id, b.id);
  EXPECT_LT(b.id, c.id);
  EXPECT_LT(c.id, l.id);
  EXPECT_EQ(t.size(), 4u);
}

TEST(Tape, ConstantsGetNoGradientWork) {
  Tape t;
  const Var x = t.constant(random_tensor(Shape{1, 2, 2, 2}, 3));
  const Var y = relu6(t, x);
  EXPECT_FALSE(t.requires_grad(y));
  t.backward(sum(t, y));
  for (double g : t.grad(x).data()) EXPECT_EQ(g, 0.0);
}

TEST(GradCheck, QuadraticIsExact) {
  const Tensor x = random_tensor(Shape{1, 2, 2, 2}, 4);
  const ScalarFn f = [](Tape& t, Var v) { return scale(t, sum(t, mul(t, v, v)), 0.5); };
  const Tensor g = gradient(f, x);
  EXPECT_TRUE(tensor_equal_within(g, x, 1e-15));
  EXPECT_LT(finite_diff_check(f, x, 1e-6).max_rel_error, 1e-9);
}

TEST(GradCheck, SamplesLargeTensorsReproducibly) {
  const Tensor x = random_tensor(Shape{1, 4, 10, 10}, 5);
  const ScalarFn f = [](Tape& t, Var v) { return weighted_sum(t, relu6(t, v)); };
  const auto a = finite_diff_check(f, x);
  const auto b = finite_diff_check(f, x);
  EXPECT_EQ(a.coords_checked, 200u);
  EXPECT_EQ(a.worst_index, b.worst_index);
  EXPECT_EQ(a.max_rel_error, b.max_rel_error);
  EXPECT_THROW(finite_diff_check(f, x, 0.0), ArgumentError);
}

TEST(GradCheck, ConvInputAndWeight) {
  struct Case { int cin, cout, groups, k, stride, pad; };
  for (const Case c : {Case{3, 4, 1, 3, 1, 1}, Case{3, 4, 1, 3, 2, 1}, Case{4, 4, 4, 3, 2, 1},
                       Case{4, 6, 2, 3, 1, 0}, Case{5, 3, 1, 1, 1, 0}, Case{2, 2, 2, 5, 1, 2}}) {
    const Tensor x = random_tensor(Shape{2, c.cin, 6, 6}, 10);
    const Tensor w = random_kernel(c.cout, c.cin / c.groups, c.k, c.k, c.groups, 11).as_tensor();
    const ScalarFn wrt_x = [&](Tape& t, Var v) {
      return weighted_sum(t, conv2d(t, v, t.constant(w), c.groups, c.stride, c.pad));
    };
    const ScalarFn wrt_w = [&](Tape& t, Var v) {
      return weighted_sum(t, conv2d(t, t.constant(x), v, c.groups, c.stride, c.pad));
    };
    EXPECT_LT(rel_err(wrt_x, x), kTol);
    EXPECT_LT(rel_err(wrt_w, w), kTol);
  }
}

TEST(GradCheck, BatchNormTraining) {
  const Tensor x = random_tensor(Shape{4, 3, 3, 3}, 12, -2.0, 3.0);
  const Tensor gamma = random_tensor(Shape{1, 3, 1, 1}, 13, 0.5, 1.5);
  const Tensor beta = random_tensor(Shape{1, 3, 1, 1}, 14);
  const double eps = 1e-5;
  const ScalarFn wrt_x = [&](Tape& t, Var v) {
    return weighted_sum(t, batchnorm_train(t, v, t.constant(gamma), t.constant(beta), eps));
  };
  const ScalarFn wrt_gamma = [&](Tape& t, Var v) {
    return weighted_sum(t, batchnorm_train(t, t.constant(x), v, t.constant(beta), eps));
  };
  const ScalarFn wrt_beta = [&](Tape& t, Var v) {
    return weighted_sum(t, batchnorm_train(t, t.constant(x), t.constant(gamma), v, eps));
  };
  EXPECT_LT(rel_err(wrt_x, x), kTol);
  EXPECT_LT(rel_err(wrt_gamma, gamma), kTol);
  EXPECT_LT(rel_err(wrt_beta, beta), kTol);
}

TEST(GradCheck, BatchNormInference) {
  const Tensor x = random_tensor(Shape{2, 3, 3, 3}, 15);
  const Tensor gamma = random_tensor(Shape{1, 3, 1, 1}, 16, 0.5, 1.5);
  const Tensor beta = random_tensor(Shape{1, 3, 1, 1}, 17);
  const std::vector<double> mean{0.1, -0.2, 0.3}, var{1.5, 0.7, 2.0};
  const ScalarFn wrt_x = [&](Tape& t, Var v) {
    return weighted_sum(
        t, batchnorm_eval(t, v, t.constant(gamma), t.constant(beta), mean, var, 1e-5));
  };
  const ScalarFn wrt_gamma = [&](Tape& t, Var v) {
    return weighted_sum(
        t, batchnorm_eval(t, t.constant(x), v, t.constant(beta), mean, var, 1e-5));
  };
  EXPECT_LT(rel_err(wrt_x, x), kTol);
  EXPECT_LT(rel_err(wrt_gamma, gamma), kTol);
}

TEST(GradCheck, Relu6AwayFromKinks) {
  Tensor x = random_tensor(Shape{1, 2, 4, 4}, 18, -3.0, 9.0);
  for (double& v : x.data()) {
    if (std::abs(v) < 1e-3 || std::abs(v - 6.0) < 1e-3) v += 0.01;
  }
  const ScalarFn f = [](Tape& t, Var v) { return weighted_sum(t, relu6(t, v)); };
  EXPECT_LT(rel_err(f, x), kTol);
}

TEST(GradCheck, BilinearUpsampleIsExact) {
  const Tensor x = random_tensor(Shape{1, 2, 3, 4}, 19);
  for (int f : {2, 4}) {
    const ScalarFn fn = [f](Tape& t, Var v) { return weighted_sum(t, bilinear_upsample(t, v, f)); };
    EXPECT_LT(rel_err(fn, x), 1e-7);
  }
}

TEST(GradCheck, PoolingAndPlumbing) {
  const Tensor x = random_tensor(Shape{2, 4, 4, 4}, 20);
  const Tensor other = random_tensor(Shape{2, 4, 4, 4}, 21);
  const Tensor bias = random_tensor(Shape{1, 4, 1, 1}, 22);
  const std::vector<ScalarFn> fns = {
      [](Tape& t, Var v) { return weighted_sum(t, avgpool(t, v, 2, 2)); },
      [](Tape& t, Var v) { return weighted_sum(t, avgpool(t, v, 4, 4)); },
      [&](Tape& t, Var v) { return weighted_sum(t, concat_channels(t, v, t.constant(other))); },
      [&](Tape& t, Var v) { return weighted_sum(t, concat_channels(t, t.constant(other), v)); },
      [](Tape& t, Var v) { return weighted_sum(t, take_first_channels(t, v, 3)); },
      [&](Tape& t, Var v) { return weighted_sum(t, eltadd(t, v, t.constant(other))); },
      [&](Tape& t, Var v) { return weighted_sum(t, add_channel_bias(t, v, t.constant(bias))); },
      [](Tape& t, Var v) { return weighted_sum(t, scale(t, v, -2.5)); },
      [&](Tape& t, Var v) { return weighted_sum(t, mul(t, v, t.constant(other))); },
      [](Tape& t, Var v) { return weighted_sum(t, mul(t, v, v)); },
  };
  for (std::size_t i = 0; i < fns.size(); ++i) EXPECT_LT(rel_err(fns[i], x), kTol) << "fn " << i;
  const ScalarFn wrt_bias = [&](Tape& t, Var b) {
    return weighted_sum(t, add_channel_bias(t, t.constant(x), b));
  };
  EXPECT_LT(rel_err(wrt_bias, bias), kTol);
}

TEST(GradCheck, LabelSmoothedCrossEntropy) {
  const Tensor z = random_tensor(Shape{4, 5, 1, 1}, 23, -2.0, 2.0);
  for (double eps : {0.0, 0.1}) {
    const ScalarFn f = [eps](Tape& t, Var v) { return label_smooth_ce(t, v, {0, 3, 4, 1}, eps); };
    EXPECT_LT(rel_err(f, z), 1e-6);
  }
}

TEST(LabelSmoothCe, UniformLogitsGiveLogK) {
  for (double eps : {0.0, 0.1, 0.5}) {
    Tape t;
    const Var z = t.constant(Tensor(Shape{3, 7, 1, 1}, 0.3));
    EXPECT_NEAR(t.value(label_smooth_ce(t, z, {0, 6, 2}, eps))[0], std::log(7.0), 1e-12);
  }
}

TEST(LabelSmoothCe, ZeroEpsIsCrossEntropy) {
  const Tensor z(Shape{1, 3, 1, 1}, std::vector<double>{1.0, 2.0, 0.5});
  Tape t;
  const double l = t.value(label_smooth_ce(t, t.constant(z), {1}, 0.0))[0];
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5));
  EXPECT_NEAR(l, lse - 2.0, 1e-12);
}

TEST(LabelSmoothCe, Errors) {
  Tape t;
  const Var z = t.constant(Tensor(Shape{2, 3, 1, 1}));
  EXPECT_THROW(label_smooth_ce(t, z, {0, 3}, 0.1), DataError);
  EXPECT_THROW(label_smooth_ce(t, z, {0}, 0.1), DataError);
  EXPECT_THROW(label_smooth_ce(t, z, {0, 1}, 1.0), ArgumentError);
}

TEST(ClosedForm, EltaddConcatTakeFirst) {
  Tape t;
  const Var a = t.leaf(random_tensor(Shape{1, 2, 2, 2}, 24));
  const Var b = t.leaf(random_tensor(Shape{1, 3, 2, 2}, 25));
  const Var c = concat_channels(t, a, b);
  const Tensor w = random_tensor(Shape{1, 5, 2, 2}, 26);
  t.backward(sum(t, mul(t, c, t.constant(w))));
  EXPECT_TRUE(tensor_equal_within(t.grad(a), nn::slice_channels(w, 0, 2), 0.0));
  EXPECT_TRUE(tensor_equal_within(t.grad(b), nn::slice_channels(w, 2, 3), 0.0));

  Tape t2;
  const Var x = t2.leaf(random_tensor(Shape{1, 2, 2, 2}, 27));
  const Var y = t2.leaf(random_tensor(Shape{1, 2, 2, 2}, 28));
  const Tensor w2 = random_tensor(Shape{1, 2, 2, 2}, 29);
  t2.backward(sum(t2, mul(t2, eltadd(t2, x, y), t2.constant(w2))));
  EXPECT_TRUE(tensor_equal_within(t2.grad(x), w2, 0.0));
  EXPECT_TRUE(tensor_equal_within(t2.grad(y), w2, 0.0));

  Tape t3;
  const Var z = t3.leaf(random_tensor(Shape{2, 4, 2, 2}, 30));
  t3.backward(sum(t3, take_first_channels(t3, z, 1)));
  const Tensor g = t3.grad(z);
  for (int i = 0; i < 2; ++i)
    for (int ch = 0; ch < 4; ++ch)
      for (int k = 0; k < 4; ++k) EXPECT_EQ(g.plane(i, ch)[k], ch == 0 ? 1.0 : 0.0);
}

TEST(ClosedForm, UpsampleBackwardIsTranspose) {
  for (int f : {2, 3, 4}) {
    const Tensor x = random_tensor(Shape{2, 3, 5, 4}, 31 + f);
    const Tensor y = random_tensor(Shape{2, 3, 5 * f, 4 * f}, 41 + f);
    const double lhs = dot(nn::bilinear_upsample(x, f), y);
    const double rhs = dot(x, nn::bilinear_upsample_backward(y, x.shape(), f));
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(Tape, AccumulatesFanOut) {
  Tape t;
  const Var x = t.leaf(random_tensor(Shape{1, 1, 2, 2}, 50));
  const Var y = eltadd(t, x, eltadd(t, x, x));
  t.backward(sum(t, y));
  for (double g : t.grad(x).data()) EXPECT_EQ(g, 3.0);
}

}  // namespace
}  // namespace hbo::ad
