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

#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hbo/common.hpp"

namespace hbo {

// NCHW extents. All dims are >= 1 for a valid tensor.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
           static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t plane() const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  bool valid() const { return n >= 1 && c >= 1 && h >= 1 && w >= 1; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << s.n << "x" << s.c << "x" << s.h << "x" << s.w;
  return os.str();
}

inline std::ostream& operator<<(std::ostream& os, const Shape& s) {
  return os << to_string(s);
}

// Rank-4 f64 array in NCHW order. Element (i, j, y, x) lives at
// ((i*c + j)*h + y)*w + x.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape) {
    if (!shape.valid()) {
      throw DimensionError("tensor dims must be >= 1, got " + to_string(shape));
    }
    data_.assign(shape.numel(), fill);
  }

  Tensor(Shape shape, std::vector<double> data)
      : shape_(shape), data_(std::move(data)) {
    if (!shape.valid()) {
      throw DimensionError("tensor dims must be >= 1, got " + to_string(shape));
    }
    if (data_.size() != shape.numel()) {
      throw DimensionError("data length " + std::to_string(data_.size()) +
                           " does not match shape " + to_string(shape));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(shape, 0.0); }
  static Tensor constant(Shape shape, double v) { return Tensor(shape, v); }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int i, int j, int y, int x) const {
    return ((static_cast<std::size_t>(i) * shape_.c + j) * shape_.h + y) *
               shape_.w +
           x;
  }

  double& at(int i, int j, int y, int x) { return data_[index(i, j, y, x)]; }
  double at(int i, int j, int y, int x) const {
    return data_[index(i, j, y, x)];
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  // Pointer to the h*w plane of sample i, channel j.
  double* plane(int i, int j) { return data_.data() + index(i, j, 0, 0); }
  const double* plane(int i, int j) const {
    return data_.data() + index(i, j, 0, 0);
  }

 private:
  Shape shape_{};
  std::vector<double> data_;
};

// Grouped convolution weights, shape (c_out, c_in / groups, k_h, k_w).
struct ConvKernel {
  int c_out = 1;
  int c_in_per_group = 1;
  int k_h = 1;
  int k_w = 1;
  int groups = 1;
  std::vector<double> data;

  ConvKernel() = default;
  ConvKernel(int c_out_, int c_in_per_group_, int k_h_, int k_w_, int groups_,
             double fill = 0.0)
      : c_out(c_out_),
        c_in_per_group(c_in_per_group_),
        k_h(k_h_),
        k_w(k_w_),
        groups(groups_) {
    if (c_out < 1 || c_in_per_group < 1 || k_h < 1 || k_w < 1 || groups < 1) {
      throw DimensionError("kernel dims must be >= 1");
    }
    if (c_out % groups != 0) {
      throw DimensionError("c_out " + std::to_string(c_out) +
                           " not divisible by groups " +
                           std::to_string(groups));
    }
    data.assign(size(), fill);
  }

  static ConvKernel depthwise(int channels, int k, double fill = 0.0) {
    return ConvKernel(channels, 1, k, k, channels, fill);
  }
  static ConvKernel pointwise(int c_in, int c_out, double fill = 0.0) {
    return ConvKernel(c_out, c_in, 1, 1, 1, fill);
  }
  static ConvKernel dense(int c_in, int c_out, int k, double fill = 0.0) {
    return ConvKernel(c_out, c_in, k, k, 1, fill);
  }

  int c_in() const { return c_in_per_group * groups; }
  int c_out_per_group() const { return c_out / groups; }
  std::size_t size() const {
    return static_cast<std::size_t>(c_out) * c_in_per_group * k_h * k_w;
  }
  bool is_depthwise() const {
    return groups == c_out && c_in_per_group == 1 && groups > 1;
  }
  bool is_pointwise() const { return k_h == 1 && k_w == 1 && groups == 1; }

  std::size_t index(int o, int i, int y, int x) const {
    return ((static_cast<std::size_t>(o) * c_in_per_group + i) * k_h + y) * k_w +
           x;
  }
  double& at(int o, int i, int y, int x) { return data[index(o, i, y, x)]; }
  double at(int o, int i, int y, int x) const { return data[index(o, i, y, x)]; }

  // View of the weights as a tensor (c_out, c_in_per_group, k_h, k_w).
  Tensor as_tensor() const {
    return Tensor(Shape{c_out, c_in_per_group, k_h, k_w}, data);
  }
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("shape mismatch: " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

// True iff max |a - b| <= tol.
inline bool tensor_equal_within(const Tensor& a, const Tensor& b, double tol) {
  return max_abs_diff(a, b) <= tol;
}

}  // namespace hbo
