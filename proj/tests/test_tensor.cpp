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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "hbo/io.hpp"
#include "hbo/oracle.hpp"
#include "hbo/tensor.hpp"
#include "test_util.hpp"

namespace hbo {
namespace {

using testing::random_kernel;
using testing::random_tensor;

// Second naive convolution, written against an explicitly padded copy of the
// input so it shares no indexing code with conv2d_oracle.
Tensor padded_reference(const Tensor& x, const ConvKernel& w, int stride, int pad) {
  const int hp = x.h() + 2 * pad, wp = x.w() + 2 * pad;
  std::vector<double> padded(static_cast<std::size_t>(x.n()) * x.c() * hp * wp, 0.0);
  auto P = [&](int i, int c, int y, int xx) -> double& {
    return padded[((static_cast<std::size_t>(i) * x.c() + c) * hp + y) * wp + xx];
  };
  for (int i = 0; i < x.n(); ++i)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < x.h(); ++y)
        for (int xx = 0; xx < x.w(); ++xx) P(i, c, y + pad, xx + pad) = x.at(i, c, y, xx);
  const int ho = (hp - w.k_h) / stride + 1, wo = (wp - w.k_w) / stride + 1;
  Tensor out(Shape{x.n(), w.c_out, ho, wo});
  const int opg = w.c_out / w.groups;
  for (int i = 0; i < x.n(); ++i)
    for (int o = 0; o < w.c_out; ++o)
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx) {
          double acc = 0.0;
          for (int ci = 0; ci < w.c_in_per_group; ++ci) {
            const int c = (o / opg) * w.c_in_per_group + ci;
            for (int ky = 0; ky < w.k_h; ++ky)
              for (int kx = 0; kx < w.k_w; ++kx)
                acc += w.at(o, ci, ky, kx) * P(i, c, y * stride + ky, xx * stride + kx);
          }
          out.at(i, o, y, xx) = acc;
        }
  return out;
}

TEST(Tensor, RejectsInvalidShapes) {
  EXPECT_THROW(Tensor(Shape{0, 1, 1, 1}), DimensionError);
  EXPECT_THROW(Tensor(Shape{1, 1, 2, 2}, std::vector<double>(3)), DimensionError);
}

TEST(Tensor, IndexRoundTrip) {
  Tensor t(Shape{2, 3, 4, 5});
  double v = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) t.at(i, j, y, x) = v++;
  for (std::size_t k = 0; k < t.size(); ++k) EXPECT_EQ(t[k], static_cast<double>(k));
  EXPECT_EQ(t.index(1, 2, 3, 4), ((1u * 3 + 2) * 4 + 3) * 5 + 4);
}

TEST(Tensor, EqualWithin) {
  const Tensor a = random_tensor(Shape{1, 2, 3, 3}, 1);
  Tensor b = a, c = a;
  for (double& v : b.data()) v += 1e-6;
  for (double& v : c.data()) v += 1e-9;
  EXPECT_TRUE(tensor_equal_within(a, a, 0.0));
  EXPECT_FALSE(tensor_equal_within(a, b, 1e-7));
  EXPECT_TRUE(tensor_equal_within(a, c, 1e-8));
  EXPECT_THROW(tensor_equal_within(a, Tensor(Shape{1, 2, 3, 4}), 1.0), DimensionError);
}

TEST(Oracle, OnesKernelSumsNine) {
  const Tensor x(Shape{1, 1, 3, 3}, 1.0);
  const ConvKernel w(1, 1, 3, 3, 1, 1.0);
  const Tensor y = conv2d_oracle(x, w, 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 9.0);
}

TEST(Oracle, IdentityPointwise) {
  const Tensor x = random_tensor(Shape{2, 4, 5, 3}, 2);
  ConvKernel w = ConvKernel::pointwise(4, 4);
  for (int c = 0; c < 4; ++c) w.at(c, c, 0, 0) = 1.0;
  EXPECT_TRUE(tensor_equal_within(conv2d_oracle(x, w, 1, 0), x, 0.0));
}

TEST(Oracle, MatchesPaddedReference) {
  const Tensor x = random_tensor(Shape{2, 4, 8, 8}, 3);
  const ConvKernel w = random_kernel(6, 4, 3, 3, 1, 4);
  const Tensor y = conv2d_oracle(x, w, 2, 1);
  ASSERT_EQ(y.shape(), (Shape{2, 6, 4, 4}));
  EXPECT_LE(max_abs_diff(y, padded_reference(x, w, 2, 1)), 1e-12);
}

TEST(Oracle, MatchesPaddedReferenceGrouped) {
  for (int seed = 0; seed < 10; ++seed) {
    const int groups = 1 + seed % 3;
    const Tensor x = random_tensor(Shape{1, 2 * groups, 7, 6}, 100 + seed);
    const ConvKernel w = random_kernel(3 * groups, 2, 3, 1 + 2 * (seed % 2), groups, 200 + seed);
    const int stride = 1 + seed % 2;
    EXPECT_LE(max_abs_diff(conv2d_oracle(x, w, stride, 1), padded_reference(x, w, stride, 1)),
              1e-12);
  }
}

TEST(Oracle, SamePaddingPreservesSpatialDims) {
  for (int k : {1, 3, 5, 7}) {
    for (int hw : {1, 4, 9}) {
      const Tensor x = random_tensor(Shape{1, 2, hw, hw + 1}, k * 10 + hw);
      const Tensor y = conv2d_oracle(x, random_kernel(3, 2, k, k, 1, 5), 1, (k - 1) / 2);
      EXPECT_EQ(y.h(), hw);
      EXPECT_EQ(y.w(), hw + 1);
    }
  }
}

TEST(Oracle, IsLinearInInput) {
  const Tensor x1 = random_tensor(Shape{2, 3, 6, 6}, 6);
  const Tensor x2 = random_tensor(Shape{2, 3, 6, 6}, 7);
  const ConvKernel w = random_kernel(4, 3, 3, 3, 1, 8);
  const double a = 0.7, b = -1.3;
  Tensor mix(x1.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x1[i] + b * x2[i];
  const Tensor y1 = conv2d_oracle(x1, w, 1, 1), y2 = conv2d_oracle(x2, w, 1, 1);
  Tensor expect(y1.shape());
  for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = a * y1[i] + b * y2[i];
  EXPECT_LE(max_abs_diff(conv2d_oracle(mix, w, 1, 1), expect), 1e-10);
}

TEST(Oracle, CountsMacs) {
  // cost_separable(7,7,4,8,3): depthwise then pointwise on a 7x7x4 input.
  const Tensor x = random_tensor(Shape{1, 4, 7, 7}, 9);
  MacCounter c;
  const Tensor d = conv2d_oracle(x, ConvKernel::depthwise(4, 3), 1, 1, &c);
  conv2d_oracle(d, ConvKernel::pointwise(4, 8), 1, 0, &c);
  EXPECT_EQ(c.macs, 3332u);
}

TEST(Oracle, RejectsBadGrouping) {
  EXPECT_THROW(conv2d_oracle(Tensor(Shape{1, 3, 4, 4}), ConvKernel(2, 2, 3, 3, 1), 1, 1),
               DimensionError);
  EXPECT_THROW(conv2d_oracle(Tensor(Shape{1, 2, 4, 4}), ConvKernel(2, 2, 3, 3, 1), 0, 1),
               ArgumentError);
}

TEST(GoldenIo, RoundTripsThroughStream) {
  const Tensor t = random_tensor(Shape{2, 3, 4, 5}, 10);
  std::stringstream ss;
  io::write_tensor(ss, t);
  EXPECT_EQ(ss.str().size(), 16 + 8 * t.size());
  const Tensor r = io::read_tensor(ss);
  EXPECT_EQ(r.shape(), t.shape());
  EXPECT_TRUE(tensor_equal_within(r, t, 0.0));
}

TEST(GoldenIo, HeaderIsLittleEndianDims) {
  std::stringstream ss;
  io::write_tensor(ss, Tensor(Shape{1, 2, 3, 258}));
  const std::string s = ss.str();
  const unsigned char expect[16] = {1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 2, 1, 0, 0};
  for (int i = 0; i < 16; ++i) EXPECT_EQ(static_cast<unsigned char>(s[i]), expect[i]);
}

TEST(GoldenIo, TruncatedInputThrows) {
  std::stringstream ss;
  io::write_tensor(ss, Tensor(Shape{1, 1, 2, 2}, 1.0));
  std::string s = ss.str();
  std::stringstream header_only(s.substr(0, 10));
  EXPECT_THROW(io::read_tensor(header_only), DataError);
  std::stringstream short_data(s.substr(0, s.size() - 3));
  EXPECT_THROW(io::read_tensor(short_data), DataError);
}

TEST(GoldenIo, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "hbo_golden_test.bin";
  const Tensor t = random_tensor(Shape{1, 2, 2, 3}, 11);
  io::save_tensor(path.string(), t);
  EXPECT_TRUE(tensor_equal_within(io::load_tensor(path.string()), t, 0.0));
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace hbo
