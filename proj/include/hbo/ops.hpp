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
#include <span>
#include <string>
#include <vector>

#include "hbo/common.hpp"
#include "hbo/oracle.hpp"
#include "hbo/tensor.hpp"

namespace hbo::nn {

namespace detail {

inline void check_grouping(const Shape& x, const ConvKernel& w) {
  if (x.c != w.groups * w.c_in_per_group) {
    throw DimensionError("input has " + std::to_string(x.c) +
                         " channels, kernel expects " +
                         std::to_string(w.groups) + " groups x " +
                         std::to_string(w.c_in_per_group));
  }
}

// Output columns ox in [lo, hi) whose tap kx lands inside [0, in_w).
inline void valid_range(int out, int in, int stride, int pad, int k, int& lo,
                        int& hi) {
  // ox*stride - pad + k >= 0  <=>  ox >= ceil((pad - k) / stride)
  const int a = pad - k;
  lo = a <= 0 ? 0 : (a + stride - 1) / stride;
  // ox*stride - pad + k <= in - 1  <=>  ox <= floor((in - 1 + pad - k) / stride)
  const int b = in - 1 + pad - k;
  hi = b < 0 ? 0 : std::min(out, b / stride + 1);
  if (lo > hi) lo = hi;
}

inline bool plain_pointwise(const ConvKernel& w, int stride, int pad) {
  return w.is_pointwise() && stride == 1 && pad == 0;
}

// Sample i of x as a (plane, channels) row-major matrix.
inline std::vector<double> pixel_major(const Tensor& x, int i) {
  const std::size_t P = x.shape().plane();
  const int C = x.c();
  std::vector<double> t(P * static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    const double* src = x.plane(i, c);
    for (std::size_t p = 0; p < P; ++p) t[p * C + c] = src[p];
  }
  return t;
}

inline void scatter_pixel_major(const std::vector<double>& t, Tensor& x, int i) {
  const std::size_t P = x.shape().plane();
  const int C = x.c();
  for (int c = 0; c < C; ++c) {
    double* dst = x.plane(i, c);
    for (std::size_t p = 0; p < P; ++p) dst[p] = t[p * C + c];
  }
}

// Kernel of a pointwise conv transposed to (c_in, c_out).
inline std::vector<double> transposed_pointwise(const ConvKernel& w) {
  std::vector<double> t(static_cast<std::size_t>(w.c_in()) * w.c_out);
  for (int o = 0; o < w.c_out; ++o)
    for (int c = 0; c < w.c_in(); ++c) t[static_cast<std::size_t>(c) * w.c_out + o] = w.at(o, c, 0, 0);
  return t;
}

}  // namespace detail

// Grouped convolution, zero padding. Per output element the taps are summed
// in the same (c_in, k_y, k_x) order as conv2d_oracle.
inline Tensor conv2d(const Tensor& x, const ConvKernel& w, int stride,
                     int pad) {
  if (stride < 1) throw ArgumentError("stride must be >= 1");
  if (pad < 0) throw ArgumentError("pad must be >= 0");
  detail::check_grouping(x.shape(), w);
  const int H = x.h(), W = x.w();
  const int ho = conv_out_dim(H, w.k_h, stride, pad);
  const int wo = conv_out_dim(W, w.k_w, stride, pad);
  if (ho < 1 || wo < 1) throw DimensionError("kernel larger than padded input");
  Tensor y(Shape{x.n(), w.c_out, ho, wo});
  const int opg = w.c_out_per_group();
  const int cpg = w.c_in_per_group;

  if (detail::plain_pointwise(w, stride, pad)) {
    // Pixel-major: each output pixel accumulates rows of the transposed
    // kernel, c_in in ascending order.
    const std::size_t P = x.shape().plane();
    const int C = cpg, O = w.c_out;
    const std::vector<double> wt = detail::transposed_pointwise(w);
    for (int i = 0; i < x.n(); ++i) {
      const std::vector<double> xt = detail::pixel_major(x, i);
      std::vector<double> yt(P * static_cast<std::size_t>(O), 0.0);
      parallel_for(P, [&](std::size_t p) {
        double* out = yt.data() + p * O;
        for (int c = 0; c < C; ++c) {
          const double a = xt[p * C + c];
          const double* row = wt.data() + static_cast<std::size_t>(c) * O;
          for (int o = 0; o < O; ++o) out[o] += a * row[o];
        }
      });
      detail::scatter_pixel_major(yt, y, i);
    }
    return y;
  }

  for (int i = 0; i < x.n(); ++i) {
    parallel_for(static_cast<std::size_t>(w.c_out), [&](std::size_t ou) {
      const int o = static_cast<int>(ou);
      const int g = o / opg;
      double* out = y.plane(i, o);
      for (int ci = 0; ci < cpg; ++ci) {
        const double* in = x.plane(i, g * cpg + ci);
        for (int ky = 0; ky < w.k_h; ++ky) {
          int oy_lo, oy_hi;
          detail::valid_range(ho, H, stride, pad, ky, oy_lo, oy_hi);
          for (int kx = 0; kx < w.k_w; ++kx) {
            const double k = w.at(o, ci, ky, kx);
            int ox_lo, ox_hi;
            detail::valid_range(wo, W, stride, pad, kx, ox_lo, ox_hi);
            for (int oy = oy_lo; oy < oy_hi; ++oy) {
              const double* row = in + (oy * stride - pad + ky) * W;
              double* orow = out + oy * wo;
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                orow[ox] += k * row[ox * stride - pad + kx];
              }
            }
          }
        }
      }
    });
  }
  return y;
}

// Depthwise k x k convolution with implicit "same" padding (k-1)/2.
inline Tensor depthwise_conv(const Tensor& x, const ConvKernel& w, int stride) {
  if (w.k_h != w.k_w || w.k_h % 2 == 0) {
    throw UnsupportedKernelError("depthwise kernel must be square with odd k, got " +
                                 std::to_string(w.k_h) + "x" +
                                 std::to_string(w.k_w));
  }
  if (w.groups != x.c() || w.c_in_per_group != 1 || w.c_out != x.c()) {
    throw DimensionError("depthwise kernel groups " + std::to_string(w.groups) +
                         " do not match input channels " +
                         std::to_string(x.c()));
  }
  if (stride != 1 && stride != 2) throw ArgumentError("depthwise stride must be 1 or 2");
  return conv2d(x, w, stride, (w.k_h - 1) / 2);
}

inline Tensor pointwise_conv(const Tensor& x, const ConvKernel& w) {
  if (!w.is_pointwise()) {
    throw DimensionError("pointwise kernel must be 1x1 with groups == 1");
  }
  if (w.c_in_per_group != x.c()) {
    throw DimensionError("pointwise kernel expects " +
                         std::to_string(w.c_in_per_group) + " channels, got " +
                         std::to_string(x.c()));
  }
  return conv2d(x, w, 1, 0);
}

// d(loss)/d(x) for conv2d, given d(loss)/d(y).
inline Tensor conv2d_backward_input(const Tensor& gy, const ConvKernel& w,
                                    const Shape& x_shape, int stride, int pad) {
  detail::check_grouping(x_shape, w);
  Tensor gx(x_shape);
  if (detail::plain_pointwise(w, stride, pad)) {
    const std::size_t P = x_shape.plane();
    const int C = w.c_in_per_group, O = w.c_out;
    for (int i = 0; i < x_shape.n; ++i) {
      const std::vector<double> gt = detail::pixel_major(gy, i);
      std::vector<double> gxt(P * static_cast<std::size_t>(C), 0.0);
      parallel_for(P, [&](std::size_t p) {
        double* out = gxt.data() + p * C;
        for (int o = 0; o < O; ++o) {
          const double g = gt[p * O + o];
          const double* row = w.data.data() + static_cast<std::size_t>(o) * C;
          for (int c = 0; c < C; ++c) out[c] += g * row[c];
        }
      });
      detail::scatter_pixel_major(gxt, gx, i);
    }
    return gx;
  }
  const int H = x_shape.h, W = x_shape.w;
  const int ho = gy.h(), wo = gy.w();
  const int opg = w.c_out_per_group();
  const int cpg = w.c_in_per_group;
  for (int i = 0; i < x_shape.n; ++i) {
    parallel_for(static_cast<std::size_t>(x_shape.c), [&](std::size_t cu) {
      const int c = static_cast<int>(cu);
      const int g = c / cpg;
      const int ci = c - g * cpg;
      double* dx = gx.plane(i, c);
      for (int o = g * opg; o < (g + 1) * opg; ++o) {
        const double* dy = gy.plane(i, o);
        for (int ky = 0; ky < w.k_h; ++ky) {
          int oy_lo, oy_hi;
          detail::valid_range(ho, H, stride, pad, ky, oy_lo, oy_hi);
          for (int kx = 0; kx < w.k_w; ++kx) {
            const double k = w.at(o, ci, ky, kx);
            int ox_lo, ox_hi;
            detail::valid_range(wo, W, stride, pad, kx, ox_lo, ox_hi);
            for (int oy = oy_lo; oy < oy_hi; ++oy) {
              double* row = dx + (oy * stride - pad + ky) * W;
              const double* drow = dy + oy * wo;
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                row[ox * stride - pad + kx] += k * drow[ox];
              }
            }
          }
        }
      }
    });
  }
  return gx;
}

// d(loss)/d(weights) for conv2d. Result has the kernel's layout.
inline ConvKernel conv2d_backward_weight(const Tensor& gy, const Tensor& x,
                                         const ConvKernel& w, int stride,
                                         int pad) {
  detail::check_grouping(x.shape(), w);
  ConvKernel gw(w.c_out, w.c_in_per_group, w.k_h, w.k_w, w.groups);
  if (detail::plain_pointwise(w, stride, pad)) {
    const std::size_t P = x.shape().plane();
    const int C = w.c_in_per_group, O = w.c_out;
    std::vector<std::vector<double>> xt, gt;
    for (int i = 0; i < x.n(); ++i) {
      xt.push_back(detail::pixel_major(x, i));
      gt.push_back(detail::pixel_major(gy, i));
    }
    parallel_for(static_cast<std::size_t>(O), [&](std::size_t o) {
      double* out = gw.data.data() + o * C;
      for (int i = 0; i < x.n(); ++i) {
        for (std::size_t p = 0; p < P; ++p) {
          const double g = gt[i][p * O + o];
          const double* row = xt[i].data() + p * C;
          for (int c = 0; c < C; ++c) out[c] += g * row[c];
        }
      }
    });
    return gw;
  }
  const int H = x.h(), W = x.w();
  const int ho = gy.h(), wo = gy.w();
  const int opg = w.c_out_per_group();
  const int cpg = w.c_in_per_group;
  parallel_for(static_cast<std::size_t>(w.c_out), [&](std::size_t ou) {
    const int o = static_cast<int>(ou);
    const int g = o / opg;
    for (int i = 0; i < x.n(); ++i) {
      const double* dy = gy.plane(i, o);
      for (int ci = 0; ci < cpg; ++ci) {
        const double* in = x.plane(i, g * cpg + ci);
        for (int ky = 0; ky < w.k_h; ++ky) {
          int oy_lo, oy_hi;
          detail::valid_range(ho, H, stride, pad, ky, oy_lo, oy_hi);
          for (int kx = 0; kx < w.k_w; ++kx) {
            int ox_lo, ox_hi;
            detail::valid_range(wo, W, stride, pad, kx, ox_lo, ox_hi);
            double acc = 0.0;
            for (int oy = oy_lo; oy < oy_hi; ++oy) {
              const double* row = in + (oy * stride - pad + ky) * W;
              const double* drow = dy + oy * wo;
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                acc += drow[ox] * row[ox * stride - pad + kx];
              }
            }
            gw.at(o, ci, ky, kx) += acc;
          }
        }
      }
    }
  });
  return gw;
}

// Elementwise min(max(x, 0), 6).
inline Tensor relu6(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = std::min(std::max(v, 0.0), 6.0);
  return y;
}

// Subgradient at the kinks 0 and 6 is taken as 0.
inline Tensor relu6_backward(const Tensor& gy, const Tensor& x) {
  Tensor gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    gx[i] = (x[i] > 0.0 && x[i] < 6.0) ? gy[i] : 0.0;
  }
  return gx;
}

struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNormParams() = default;
  explicit BatchNormParams(int channels, double eps_ = 1e-5,
                           double momentum_ = 0.1)
      : gamma(static_cast<std::size_t>(channels), 1.0),
        beta(static_cast<std::size_t>(channels), 0.0),
        running_mean(static_cast<std::size_t>(channels), 0.0),
        running_var(static_cast<std::size_t>(channels), 1.0),
        eps(eps_),
        momentum(momentum_) {}

  int channels() const { return static_cast<int>(gamma.size()); }

  void validate(int c) const {
    const auto n = static_cast<std::size_t>(c);
    if (gamma.size() != n || beta.size() != n || running_mean.size() != n ||
        running_var.size() != n) {
      throw DimensionError("batchnorm has " + std::to_string(gamma.size()) +
                           " channels, input has " + std::to_string(c));
    }
    if (!(eps > 0.0)) throw ArgumentError("batchnorm eps must be > 0");
  }
};

// Per-channel batch moments over (n, h, w). var is the biased estimate.
struct BatchMoments {
  std::vector<double> mean;
  std::vector<double> var;
};

inline BatchMoments batch_moments(const Tensor& x) {
  const int C = x.c();
  const std::size_t P = x.shape().plane();
  const double count = static_cast<double>(x.n()) * static_cast<double>(P);
  BatchMoments m{std::vector<double>(C, 0.0), std::vector<double>(C, 0.0)};
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    for (int i = 0; i < x.n(); ++i) {
      const double* p = x.plane(i, c);
      for (std::size_t k = 0; k < P; ++k) s += p[k];
    }
    const double mu = s / count;
    double v = 0.0;
    for (int i = 0; i < x.n(); ++i) {
      const double* p = x.plane(i, c);
      for (std::size_t k = 0; k < P; ++k) v += (p[k] - mu) * (p[k] - mu);
    }
    m.mean[c] = mu;
    m.var[c] = v / count;
  }
  return m;
}

// y = gamma * (x - mean) / sqrt(var + eps) + beta, per channel.
inline Tensor batchnorm_apply(const Tensor& x, std::span<const double> mean,
                              std::span<const double> var,
                              std::span<const double> gamma,
                              std::span<const double> beta, double eps) {
  Tensor y(x.shape());
  const std::size_t P = x.shape().plane();
  for (int i = 0; i < x.n(); ++i) {
    for (int c = 0; c < x.c(); ++c) {
      const double scale = gamma[c] / std::sqrt(var[c] + eps);
      const double shift = beta[c] - mean[c] * scale;
      const double* in = x.plane(i, c);
      double* out = y.plane(i, c);
      for (std::size_t k = 0; k < P; ++k) out[k] = in[k] * scale + shift;
    }
  }
  return y;
}

// Folds batch moments into running statistics. The running variance uses
// the unbiased estimate when more than one value was averaged.
inline void update_running_stats(BatchNormParams& p, const BatchMoments& m,
                                 std::size_t count) {
  const double unbias =
      count > 1 ? static_cast<double>(count) / static_cast<double>(count - 1)
                : 1.0;
  for (std::size_t c = 0; c < p.gamma.size(); ++c) {
    p.running_mean[c] =
        (1.0 - p.momentum) * p.running_mean[c] + p.momentum * m.mean[c];
    p.running_var[c] =
        (1.0 - p.momentum) * p.running_var[c] + p.momentum * m.var[c] * unbias;
  }
}

// Inference mode: uses running statistics, leaves p untouched.
inline Tensor batchnorm(const Tensor& x, const BatchNormParams& p) {
  p.validate(x.c());
  return batchnorm_apply(x, p.running_mean, p.running_var, p.gamma, p.beta,
                         p.eps);
}

// Training mode normalizes with batch statistics and updates p's running
// statistics; inference mode behaves like the const overload.
inline Tensor batchnorm(const Tensor& x, BatchNormParams& p, bool training) {
  p.validate(x.c());
  if (!training) return batchnorm(x, static_cast<const BatchNormParams&>(p));
  const BatchMoments m = batch_moments(x);
  Tensor y = batchnorm_apply(x, m.mean, m.var, p.gamma, p.beta, p.eps);
  update_running_stats(p, m, static_cast<std::size_t>(x.n()) * x.shape().plane());
  return y;
}

struct BatchNormGrads {
  Tensor dx;
  std::vector<double> dgamma;
  std::vector<double> dbeta;
};

// Backward through batch-statistics normalization.
inline BatchNormGrads batchnorm_train_backward(const Tensor& gy, const Tensor& x,
                                               std::span<const double> gamma,
                                               double eps) {
  const BatchMoments m = batch_moments(x);
  const int C = x.c();
  const std::size_t P = x.shape().plane();
  const double count = static_cast<double>(x.n()) * static_cast<double>(P);
  BatchNormGrads g{Tensor(x.shape()), std::vector<double>(C, 0.0),
                   std::vector<double>(C, 0.0)};
  for (int c = 0; c < C; ++c) {
    const double inv_std = 1.0 / std::sqrt(m.var[c] + eps);
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < x.n(); ++i) {
      const double* xp = x.plane(i, c);
      const double* dp = gy.plane(i, c);
      for (std::size_t k = 0; k < P; ++k) {
        sum_dy += dp[k];
        sum_dy_xhat += dp[k] * (xp[k] - m.mean[c]) * inv_std;
      }
    }
    g.dgamma[c] = sum_dy_xhat;
    g.dbeta[c] = sum_dy;
    const double a = gamma[c] * inv_std / count;
    for (int i = 0; i < x.n(); ++i) {
      const double* xp = x.plane(i, c);
      const double* dp = gy.plane(i, c);
      double* out = g.dx.plane(i, c);
      for (std::size_t k = 0; k < P; ++k) {
        const double xhat = (xp[k] - m.mean[c]) * inv_std;
        out[k] = a * (count * dp[k] - sum_dy - xhat * sum_dy_xhat);
      }
    }
  }
  return g;
}

// Backward through the running-statistics (inference) affine map.
inline BatchNormGrads batchnorm_eval_backward(const Tensor& gy, const Tensor& x,
                                              const BatchNormParams& p) {
  const int C = x.c();
  const std::size_t P = x.shape().plane();
  BatchNormGrads g{Tensor(x.shape()), std::vector<double>(C, 0.0),
                   std::vector<double>(C, 0.0)};
  for (int c = 0; c < C; ++c) {
    const double inv_std = 1.0 / std::sqrt(p.running_var[c] + p.eps);
    for (int i = 0; i < x.n(); ++i) {
      const double* xp = x.plane(i, c);
      const double* dp = gy.plane(i, c);
      double* out = g.dx.plane(i, c);
      for (std::size_t k = 0; k < P; ++k) {
        out[k] = dp[k] * p.gamma[c] * inv_std;
        g.dgamma[c] += dp[k] * (xp[k] - p.running_mean[c]) * inv_std;
        g.dbeta[c] += dp[k];
      }
    }
  }
  return g;
}

// Half-pixel-centre source coordinate convention for bilinear resampling.
// src = (dst + 0.5) / factor - 0.5, clamped to [0, in - 1].
struct BilinearTap {
  int i0;
  int i1;
  double frac;  // weight of i1; i0 gets 1 - frac
};

inline std::vector<BilinearTap> bilinear_taps(int in, int factor) {
  std::vector<BilinearTap> taps(static_cast<std::size_t>(in) * factor);
  for (int d = 0; d < in * factor; ++d) {
    double src = (d + 0.5) / factor - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in - 1);
    taps[d] = BilinearTap{i0, i1, src - i0};
  }
  return taps;
}

inline Tensor bilinear_upsample(const Tensor& x, int factor) {
  if (factor < 1) throw ArgumentError("upsample factor must be >= 1, got " + std::to_string(factor));
  if (factor == 1) return x;
  const int H = x.h() * factor, W = x.w() * factor;
  const auto ty = bilinear_taps(x.h(), factor);
  const auto tx = bilinear_taps(x.w(), factor);
  Tensor y(Shape{x.n(), x.c(), H, W});
  for (int i = 0; i < x.n(); ++i) {
    for (int c = 0; c < x.c(); ++c) {
      const double* in = x.plane(i, c);
      double* out = y.plane(i, c);
      for (int oy = 0; oy < H; ++oy) {
        const auto& a = ty[oy];
        const double* r0 = in + a.i0 * x.w();
        const double* r1 = in + a.i1 * x.w();
        for (int ox = 0; ox < W; ++ox) {
          const auto& b = tx[ox];
          const double top = r0[b.i0] * (1.0 - b.frac) + r0[b.i1] * b.frac;
          const double bot = r1[b.i0] * (1.0 - b.frac) + r1[b.i1] * b.frac;
          out[oy * W + ox] = top * (1.0 - a.frac) + bot * a.frac;
        }
      }
    }
  }
  return y;
}

// Transpose of bilinear_upsample's linear map.
inline Tensor bilinear_upsample_backward(const Tensor& gy, const Shape& x_shape,
                                         int factor) {
  if (factor == 1) return gy;
  const auto ty = bilinear_taps(x_shape.h, factor);
  const auto tx = bilinear_taps(x_shape.w, factor);
  Tensor gx(x_shape);
  const int H = gy.h(), W = gy.w();
  for (int i = 0; i < x_shape.n; ++i) {
    for (int c = 0; c < x_shape.c; ++c) {
      const double* dy = gy.plane(i, c);
      double* dx = gx.plane(i, c);
      for (int oy = 0; oy < H; ++oy) {
        const auto& a = ty[oy];
        for (int ox = 0; ox < W; ++ox) {
          const auto& b = tx[ox];
          const double g = dy[oy * W + ox];
          dx[a.i0 * x_shape.w + b.i0] += g * (1.0 - a.frac) * (1.0 - b.frac);
          dx[a.i0 * x_shape.w + b.i1] += g * (1.0 - a.frac) * b.frac;
          dx[a.i1 * x_shape.w + b.i0] += g * a.frac * (1.0 - b.frac);
          dx[a.i1 * x_shape.w + b.i1] += g * a.frac * b.frac;
        }
      }
    }
  }
  return gx;
}

// Average pooling without padding.
inline Tensor avgpool(const Tensor& x, int kernel, int stride) {
  if (kernel < 1 || stride < 1) throw ArgumentError("pool kernel and stride must be >= 1");
  if (kernel > x.h() || kernel > x.w()) {
    throw DimensionError("pool kernel " + std::to_string(kernel) +
                         " larger than input " + std::to_string(x.h()) + "x" +
                         std::to_string(x.w()));
  }
  const int ho = (x.h() - kernel) / stride + 1;
  const int wo = (x.w() - kernel) / stride + 1;
  const double inv = 1.0 / (static_cast<double>(kernel) * kernel);
  Tensor y(Shape{x.n(), x.c(), ho, wo});
  for (int i = 0; i < x.n(); ++i) {
    for (int c = 0; c < x.c(); ++c) {
      const double* in = x.plane(i, c);
      double* out = y.plane(i, c);
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          double s = 0.0;
          for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
              s += in[(oy * stride + ky) * x.w() + ox * stride + kx];
            }
          }
          out[oy * wo + ox] = s * inv;
        }
      }
    }
  }
  return y;
}

inline Tensor avgpool_backward(const Tensor& gy, const Shape& x_shape,
                               int kernel, int stride) {
  Tensor gx(x_shape);
  const double inv = 1.0 / (static_cast<double>(kernel) * kernel);
  for (int i = 0; i < x_shape.n; ++i) {
    for (int c = 0; c < x_shape.c; ++c) {
      const double* dy = gy.plane(i, c);
      double* dx = gx.plane(i, c);
      for (int oy = 0; oy < gy.h(); ++oy) {
        for (int ox = 0; ox < gy.w(); ++ox) {
          const double g = dy[oy * gy.w() + ox] * inv;
          for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
              dx[(oy * stride + ky) * x_shape.w + ox * stride + kx] += g;
            }
          }
        }
      }
    }
  }
  return gx;
}

// Channels of a followed by channels of b.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw DimensionError("concat needs equal n/h/w: " + to_string(a.shape()) +
                         " vs " + to_string(b.shape()));
  }
  Tensor y(Shape{a.n(), a.c() + b.c(), a.h(), a.w()});
  const std::size_t P = a.shape().plane();
  for (int i = 0; i < a.n(); ++i) {
    std::copy_n(a.plane(i, 0), a.c() * P, y.plane(i, 0));
    std::copy_n(b.plane(i, 0), b.c() * P, y.plane(i, a.c()));
  }
  return y;
}

// Channels [first, first + count) of x.
inline Tensor slice_channels(const Tensor& x, int first, int count) {
  if (first < 0 || count < 1 || first + count > x.c()) {
    throw DimensionError("channel slice [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") out of range for " +
                         std::to_string(x.c()) + " channels");
  }
  Tensor y(Shape{x.n(), count, x.h(), x.w()});
  const std::size_t P = x.shape().plane();
  for (int i = 0; i < x.n(); ++i) {
    std::copy_n(x.plane(i, first), count * P, y.plane(i, 0));
  }
  return y;
}

inline Tensor take_first_channels(const Tensor& x, int m) {
  return slice_channels(x, 0, m);
}

inline Tensor eltadd(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("eltadd needs identical shapes: " +
                         to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return y;
}

// Adds bias[c] to every element of channel c.
inline Tensor add_channel_bias(const Tensor& x, std::span<const double> bias) {
  if (bias.size() != static_cast<std::size_t>(x.c())) {
    throw DimensionError("bias has " + std::to_string(bias.size()) +
                         " entries, input has " + std::to_string(x.c()) +
                         " channels");
  }
  Tensor y = x;
  const std::size_t P = x.shape().plane();
  for (int i = 0; i < x.n(); ++i) {
    for (int c = 0; c < x.c(); ++c) {
      double* p = y.plane(i, c);
      for (std::size_t k = 0; k < P; ++k) p[k] += bias[c];
    }
  }
  return y;
}

}  // namespace hbo::nn
