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
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hbo/exec.hpp"
#include "hbo/network.hpp"

// Multiply-add accounting. Only convolutions cost MACs; normalization,
// activations, pooling, resampling, eltadd and concat count zero, as do bias
// terms. Counts are per sample.
namespace hbo {

// Depthwise k x k followed by pointwise c1 -> c2 on an h x w map.
inline std::uint64_t cost_separable(int h, int w, int c1, int c2, int k) {
  if (h < 1 || w < 1 || c1 < 1 || c2 < 1 || k < 1) {
    throw ArgumentError("cost_separable arguments must be >= 1");
  }
  const std::uint64_t hw = static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(w);
  return hw * c1 * k * k + hw * c1 * c2;
}

// Contraction-expansion wrapped around a body of full-resolution cost B:
// B / s^2 + (h/s * w/s * c1 + h * w * c2) * k^2.
inline std::uint64_t cost_hbo(std::uint64_t B, int h, int w, int c1, int c2, int k, int s) {
  if (s != 1 && s != 2 && s != 4 && s != 8) throw ConfigError("contraction s must be 1, 2, 4 or 8");
  if (h < 1 || w < 1 || c1 < 1 || c2 < 1 || k < 1) {
    throw ArgumentError("cost_hbo arguments must be >= 1");
  }
  if (h % s != 0 || w % s != 0) {
    throw ConfigError("spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                      " not divisible by s = " + std::to_string(s));
  }
  const std::uint64_t s2 = static_cast<std::uint64_t>(s) * s;
  const std::uint64_t hs = static_cast<std::uint64_t>(h / s), ws = static_cast<std::uint64_t>(w / s);
  const std::uint64_t hw = static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(w);
  return B / s2 + (hs * ws * c1 + hw * c2) * k * k;
}

// MACs of one conv producing out (per sample).
inline std::uint64_t conv_macs(const ConvKernel& k, const Shape& out) {
  return static_cast<std::uint64_t>(out.h) * out.w * static_cast<std::uint64_t>(k.c_out) *
         k.c_in_per_group * k.k_h * k.k_w;
}

inline const char* conv_kind(const ConvKernel& k) {
  if (k.is_depthwise()) return "depthwise";
  if (k.is_pointwise()) return "pointwise";
  return "conv";
}

struct LedgerRow {
  std::string name;
  std::string kind;
  Shape out;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
};

struct CostLedger {
  std::vector<LedgerRow> rows;
  std::uint64_t total_macs = 0;
  std::uint64_t total_params = 0;

  double mflops() const { return static_cast<double>(total_macs) / 1e6; }
  // Rounded to the nearest integer, the way totals are quoted.
  long long mflops_rounded() const { return std::llround(mflops()); }
  double mparams() const { return static_cast<double>(total_params) / 1e6; }
};

// One row per convolution, in execution order.
inline CostLedger ledger(const Network& net, int resolution) {
  ShapeOps ops;
  net.run(ops, Shape{1, 3, resolution, resolution});
  CostLedger L;
  for (const auto& r : ops.convs) {
    LedgerRow row;
    row.name = r.unit->name;
    row.kind = conv_kind(r.unit->kernel);
    row.out = r.out;
    row.macs = conv_macs(r.unit->kernel, r.out);
    row.params = r.unit->param_count();
    L.total_macs += row.macs;
    L.total_params += row.params;
    L.rows.push_back(std::move(row));
  }
  return L;
}

inline CostLedger ledger(const Network& net) { return ledger(net, net.spec.resolution); }

// Ledger of a spec at its own resolution, without initializing weights.
inline CostLedger ledger(const NetworkSpec& spec) {
  return ledger(build_network(spec, 0, false), spec.resolution);
}

inline std::string shape_hwc(const Shape& s) {
  return std::to_string(s.h) + "x" + std::to_string(s.w) + "x" + std::to_string(s.c);
}

inline std::string format_table(const CostLedger& L) {
  std::ostringstream os;
  os << std::left << std::setw(34) << "layer" << std::setw(11) << "kind" << std::setw(14)
     << "output" << std::right << std::setw(14) << "MACs" << std::setw(11) << "params" << "\n";
  for (const auto& r : L.rows) {
    os << std::left << std::setw(34) << r.name << std::setw(11) << r.kind << std::setw(14)
       << shape_hwc(r.out) << std::right << std::setw(14) << r.macs << std::setw(11)
       << r.params << "\n";
  }
  os << std::fixed << std::setprecision(3) << "total: " << L.total_macs << " MACs ("
     << L.mflops() << " MFLOPs, rounded " << L.mflops_rounded() << "), " << L.total_params
     << " params (" << L.mparams() << " M)\n";
  return os.str();
}

inline constexpr int kReportFormatVersion = 1;

inline std::string to_csv(const CostLedger& L) {
  std::ostringstream os;
  os << "# format_version=" << kReportFormatVersion << "\n";
  os << "layer,kind,output_shape,macs,params\n";
  for (const auto& r : L.rows) {
    os << r.name << "," << r.kind << "," << shape_hwc(r.out) << "," << r.macs << ","
       << r.params << "\n";
  }
  os << "total,,," << L.total_macs << "," << L.total_params << "\n";
  return os.str();
}

inline nlohmann::json to_json(const CostLedger& L) {
  nlohmann::json j;
  j["format_version"] = kReportFormatVersion;
  j["total_macs"] = L.total_macs;
  j["total_params"] = L.total_params;
  j["mflops"] = L.mflops();
  j["rows"] = nlohmann::json::array();
  for (const auto& r : L.rows) {
    j["rows"].push_back({{"layer", r.name},
                         {"kind", r.kind},
                         {"output", {r.out.h, r.out.w, r.out.c}},
                         {"macs", r.macs},
                         {"params", r.params}});
  }
  return j;
}

// Relative deviation of a MAC total from a quoted MFLOPs figure.
inline double mflops_deviation(std::uint64_t macs, double expected_mflops) {
  return (static_cast<double>(macs) / 1e6 - expected_mflops) / expected_mflops;
}

inline bool within_tolerance(std::uint64_t macs, double expected_mflops, double tol) {
  return std::abs(mflops_deviation(macs, expected_mflops)) <= tol;
}

}  // namespace hbo
