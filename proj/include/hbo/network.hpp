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
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hbo/blocks.hpp"
#include "hbo/exec.hpp"

namespace hbo {

enum class StageOp {
  Conv3x3,
  HBO,
  InvertedResidual,
  Conv1x1Linear,
  Conv1x1,
  AvgPool,
  Classifier
};

inline const char* to_string(StageOp op) {
  switch (op) {
    case StageOp::Conv3x3: return "conv3x3";
    case StageOp::HBO: return "hbo";
    case StageOp::InvertedResidual: return "inverted_residual";
    case StageOp::Conv1x1Linear: return "conv1x1_linear";
    case StageOp::Conv1x1: return "conv1x1";
    case StageOp::AvgPool: return "avgpool";
    case StageOp::Classifier: return "classifier";
  }
  return "?";
}

inline std::optional<StageOp> parse_stage_op(const std::string& s) {
  for (StageOp op : {StageOp::Conv3x3, StageOp::HBO, StageOp::InvertedResidual,
                     StageOp::Conv1x1Linear, StageOp::Conv1x1, StageOp::AvgPool,
                     StageOp::Classifier}) {
    if (s == to_string(op)) return op;
  }
  return std::nullopt;
}

// One row of a stage table: operator, expansion t, base channels c, repeats
// n, stride s of the first repeat.
struct StageSpec {
  StageOp op = StageOp::Conv3x3;
  double t = 1.0;
  int c = 0;
  int n = 1;
  int s = 1;
  // Keep the base channel count when width < 1 (wider widths still scale).
  bool keep_below_unit_width = false;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

// Channel divisor as a function of width: a fallback plus exact-width
// overrides.
struct DivisorPolicy {
  int fallback = 8;
  std::vector<std::pair<double, int>> by_width;

  int for_width(double w) const {
    for (const auto& [bw, d] : by_width) {
      if (std::abs(bw - w) < 1e-9) return d;
    }
    return fallback;
  }
  friend bool operator==(const DivisorPolicy&, const DivisorPolicy&) = default;
};

struct NetworkSpec {
  std::string name = "custom";
  std::vector<StageSpec> stages;
  double width = 1.0;
  // Fixed divisor; overrides the policy when set.
  std::optional<int> divisor;
  DivisorPolicy policy;
  // At width 1.0 use the table's channels verbatim.
  bool exact_at_unit_width = false;
  int resolution = 224;
  int num_classes = 1000;
  // Upper bound on HBO contraction units per block.
  int max_contraction = 1;
  int spatial_kernel = 3;
  int body_kernel = 3;
  bool hbo_residual = true;
  bool skip_identity_expansion = false;

  int effective_divisor() const { return divisor ? *divisor : policy.for_width(width); }

  int channels(const StageSpec& st) const {
    if (st.keep_below_unit_width && width < 1.0) return st.c;
    if (exact_at_unit_width && width == 1.0) return st.c;
    return make_divisible(st.c * width, effective_divisor());
  }

  // Product of all stage strides.
  int total_stride() const {
    int f = 1;
    for (const auto& st : stages) f *= st.s;
    return f;
  }

  void validate() const {
    auto fail = [](std::size_t row, const std::string& msg) {
      throw ConfigError("stage row " + std::to_string(row) + ": " + msg);
    };
    if (stages.empty()) throw ConfigError("stage table is empty");
    if (!(width > 0.0 && width <= 4.0)) {
      throw ConfigError("width must be in (0, 4], got " + std::to_string(width));
    }
    if (effective_divisor() < 1) throw ConfigError("divisor must be >= 1");
    if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
    if (max_contraction < 1 || max_contraction > 8) {
      throw ConfigError("max_contraction must be in [1, 8]");
    }
    for (int k : {spatial_kernel, body_kernel}) {
      if (k < 1 || k % 2 == 0) throw ConfigError("kernels must be odd and >= 1");
    }
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const StageSpec& st = stages[i];
      if (st.n < 1) fail(i, "repeat count n must be >= 1");
      if (st.s != 1 && st.s != 2) fail(i, "stride s must be 1 or 2");
      const bool blockish = st.op == StageOp::HBO || st.op == StageOp::InvertedResidual;
      const bool convish = blockish || st.op == StageOp::Conv3x3 ||
                           st.op == StageOp::Conv1x1 || st.op == StageOp::Conv1x1Linear;
      if (convish && st.c < 1) fail(i, "channels c must be >= 1");
      if (blockish && !(st.t > 0.0)) fail(i, "expansion t must be > 0");
      if (st.op == StageOp::HBO && channels(st) % 2 != 0) {
        fail(i, "HBO output channels must be even, got " + std::to_string(channels(st)));
      }
      if (!blockish && st.n != 1) fail(i, std::string(to_string(st.op)) + " must have n == 1");
      if ((st.op == StageOp::AvgPool || st.op == StageOp::Classifier) && st.s != 1) {
        fail(i, std::string(to_string(st.op)) + " must have s == 1");
      }
      if (i == 0 && st.op != StageOp::Conv3x3) fail(i, "table must start with conv3x3");
      const bool last = i + 1 == stages.size();
      if (st.op == StageOp::Classifier && !last) fail(i, "classifier must be the last row");
      if (last && st.op != StageOp::Classifier) fail(i, "table must end with classifier");
      if (st.op == StageOp::AvgPool &&
          (last || stages[i + 1].op != StageOp::Classifier)) {
        fail(i, "avgpool must directly precede the classifier");
      }
      if (st.op == StageOp::Classifier && (i == 0 || stages[i - 1].op != StageOp::AvgPool)) {
        fail(i, "classifier must follow avgpool");
      }
    }
    if (resolution < 1 || resolution % total_stride() != 0) {
      throw ConfigError("resolution " + std::to_string(resolution) +
                        " is not divisible by the network stride " +
                        std::to_string(total_stride()));
    }
  }
};

inline constexpr int kSpecFormatVersion = 1;

inline NetworkSpec parse_network_spec(const nlohmann::json& j) {
  NetworkSpec spec;
  try {
    if (j.value("format_version", kSpecFormatVersion) != kSpecFormatVersion) {
      throw ConfigError("unsupported spec format_version " +
                        j.at("format_version").dump());
    }
    spec.name = j.value("name", std::string("custom"));
    spec.width = j.value("width", 1.0);
    spec.resolution = j.value("resolution", 224);
    spec.num_classes = j.value("num_classes", 1000);
    spec.exact_at_unit_width = j.value("exact_at_unit_width", false);
    spec.max_contraction = j.value("max_contraction", 1);
    spec.spatial_kernel = j.value("spatial_kernel", 3);
    spec.body_kernel = j.value("body_kernel", 3);
    spec.hbo_residual = j.value("hbo_residual", true);
    spec.skip_identity_expansion = j.value("skip_identity_expansion", false);
    if (j.contains("divisor")) {
      const auto& d = j.at("divisor");
      if (d.is_number_integer()) {
        spec.divisor = d.get<int>();
      } else {
        spec.policy.fallback = d.value("default", 8);
        for (const auto& o : d.value("by_width", nlohmann::json::array())) {
          spec.policy.by_width.emplace_back(o.at("width").get<double>(),
                                            o.at("divisor").get<int>());
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed network spec: ") + e.what());
  }
  if (!j.contains("stages") || !j.at("stages").is_array()) {
    throw ConfigError("network spec needs a 'stages' array");
  }
  const auto& rows = j.at("stages");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    try {
      StageSpec st;
      const std::string op = r.at("operator").get<std::string>();
      const auto parsed = parse_stage_op(op);
      if (!parsed) throw ConfigError("unknown operator '" + op + "'");
      st.op = *parsed;
      st.t = r.value("t", 1.0);
      st.c = r.value("c", 0);
      st.n = r.value("n", 1);
      st.s = r.value("s", 1);
      st.keep_below_unit_width = r.value("keep_below_unit_width", false);
      spec.stages.push_back(st);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("stage row " + std::to_string(i) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("stage row " + std::to_string(i) + ": " + e.what());
    }
  }
  spec.validate();
  return spec;
}

inline NetworkSpec parse_network_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("network spec is not valid JSON: ") + e.what());
  }
  return parse_network_spec(j);
}

inline NetworkSpec load_network_spec(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open spec file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_network_spec(ss.str());
}

inline nlohmann::json to_json(const NetworkSpec& spec) {
  nlohmann::json j;
  j["format_version"] = kSpecFormatVersion;
  j["name"] = spec.name;
  j["width"] = spec.width;
  j["resolution"] = spec.resolution;
  j["num_classes"] = spec.num_classes;
  if (spec.divisor) {
    j["divisor"] = *spec.divisor;
  } else {
    nlohmann::json d;
    d["default"] = spec.policy.fallback;
    d["by_width"] = nlohmann::json::array();
    for (const auto& [w, v] : spec.policy.by_width) {
      d["by_width"].push_back({{"width", w}, {"divisor", v}});
    }
    j["divisor"] = d;
  }
  j["exact_at_unit_width"] = spec.exact_at_unit_width;
  j["max_contraction"] = spec.max_contraction;
  j["spatial_kernel"] = spec.spatial_kernel;
  j["body_kernel"] = spec.body_kernel;
  j["hbo_residual"] = spec.hbo_residual;
  j["skip_identity_expansion"] = spec.skip_identity_expansion;
  j["stages"] = nlohmann::json::array();
  for (const auto& st : spec.stages) {
    nlohmann::json r{{"operator", to_string(st.op)}, {"t", st.t}, {"c", st.c},
                     {"n", st.n}, {"s", st.s}};
    if (st.keep_below_unit_width) r["keep_below_unit_width"] = true;
    j["stages"].push_back(r);
  }
  return j;
}

enum class LayerKind { Conv, Block, GlobalPool, Classifier };

struct Layer {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  // Row of the stage table this layer came from.
  int stage = 0;
  BlockConfig cfg;
  // Conv and classifier layers hold exactly one unit.
  BlockParams params;
};

class Network {
 public:
  NetworkSpec spec;
  std::vector<Layer> layers;

  int num_classes() const { return spec.num_classes; }

  std::vector<ConvUnit*> units() {
    std::vector<ConvUnit*> out;
    for (auto& l : layers)
      for (auto& u : l.params.units) out.push_back(&u);
    return out;
  }
  std::vector<const ConvUnit*> units() const {
    std::vector<const ConvUnit*> out;
    for (const auto& l : layers)
      for (const auto& u : l.params.units) out.push_back(&u);
    return out;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.params.param_count();
    return n;
  }

  template <class Ops>
  typename Ops::Value run_layer(Ops& ops, const Layer& l, const typename Ops::Value& x) const {
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::Classifier:
        return ops.unit(l.params.units.front(), x);
      case LayerKind::Block:
        return block_forward(ops, l.cfg, l.params, x);
      case LayerKind::GlobalPool: {
        const Shape s = ops.shape_of(x);
        if (s.h != s.w) {
          throw DimensionError("global pool needs a square map, got " + to_string(s));
        }
        return ops.avgpool(x, s.h, s.h);
      }
    }
    throw ConfigError("unknown layer kind");
  }

  // Runs every layer; on_layer(index, value) is called after each one.
  template <class Ops, class Fn>
  typename Ops::Value run(Ops& ops, const typename Ops::Value& x, Fn&& on_layer) const {
    check_input(ops.shape_of(x));
    typename Ops::Value y = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      y = run_layer(ops, layers[i], y);
      on_layer(i, y);
    }
    return y;
  }

  template <class Ops>
  typename Ops::Value run(Ops& ops, const typename Ops::Value& x) const {
    return run(ops, x, [](std::size_t, const typename Ops::Value&) {});
  }

  // Inference-mode logits, shape (n, num_classes, 1, 1).
  Tensor forward(const Tensor& x) const {
    EagerOps ops;
    return run(ops, x);
  }

  void check_input(const Shape& s) const {
    const int f = spec.total_stride();
    if (s.h % f != 0 || s.w % f != 0) {
      throw ConfigError("input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                        " is not divisible by the network stride " + std::to_string(f));
    }
  }

  // Folds training-mode batch statistics into this network's BN buffers.
  void commit(const std::vector<UnitMoments>& ms) {
    auto all = units();
    for (const auto& m : ms) {
      const int uid = m.unit ? m.unit->uid : -1;
      if (uid < 0 || static_cast<std::size_t>(uid) >= all.size() || all[uid] != m.unit) {
        throw ContractError("batch statistics belong to a different network");
      }
      nn::update_running_stats(all[uid]->bn, m.moments, m.count);
    }
  }
};

// Weights ~ N(0, 2 / fan_out) with fan_out = c_out * k_h * k_w; BN gamma 1,
// beta 0, running stats reset. The classifier gets N(0, 0.01^2) weights and zero bias.
inline constexpr double kClassifierInitStd = 0.01;

inline void init_weights(Network& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (ConvUnit* u : net.units()) {
    const ConvKernel& k = u->kernel;
    const double fan_out = static_cast<double>(k.c_out) * k.k_h * k.k_w;
    const double stddev = u->has_bias ? kClassifierInitStd : std::sqrt(2.0 / fan_out);
    std::normal_distribution<double> d(0.0, stddev);
    for (double& v : u->kernel.data) v = d(rng);
    if (u->has_bn) u->bn = nn::BatchNormParams(k.c_out, u->bn.eps, u->bn.momentum);
    std::fill(u->bias.begin(), u->bias.end(), 0.0);
  }
}

// Largest k' <= k_max with size divisible by 2^k' (at least 1).
inline int clamp_contraction(int size, int k_max) {
  int k = 1;
  while (k < k_max && size % (1 << (k + 1)) == 0) ++k;
  return k;
}

// Builds the layer list. With init == false the kernels stay zero, which is
// all the cost ledger and shape tracing need.
inline Network build_network(const NetworkSpec& spec, std::uint64_t seed = 0,
                             bool init = true) {
  spec.validate();
  Network net;
  net.spec = spec;
  int c = 3;
  int h = spec.resolution;
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const StageSpec& st = spec.stages[i];
    const int stage = static_cast<int>(i);
    const std::string base = "s" + std::to_string(i) + "." + to_string(st.op);
    auto single = [&](ConvUnit u, LayerKind kind) {
      Layer l;
      l.name = base;
      l.kind = kind;
      l.stage = stage;
      u.name = base;
      l.params.units.push_back(std::move(u));
      net.layers.push_back(std::move(l));
    };
    switch (st.op) {
      case StageOp::Conv3x3: {
        const int co = spec.channels(st);
        single(ConvUnit("", ConvKernel::dense(c, co, 3), st.s, true, true), LayerKind::Conv);
        c = co;
        h /= st.s;
        break;
      }
      case StageOp::Conv1x1:
      case StageOp::Conv1x1Linear: {
        const int co = spec.channels(st);
        single(ConvUnit("", ConvKernel::pointwise(c, co), 1, true, st.op == StageOp::Conv1x1),
               LayerKind::Conv);
        c = co;
        break;
      }
      case StageOp::HBO:
      case StageOp::InvertedResidual: {
        const int co = spec.channels(st);
        for (int j = 0; j < st.n; ++j) {
          BlockConfig cfg;
          cfg.kind = st.op == StageOp::HBO ? BlockKind::HarmoniousBottleneck
                                           : BlockKind::InvertedResidual;
          cfg.c_in = c;
          cfg.c_out = co;
          cfg.t = st.t;
          cfg.stride = j == 0 ? st.s : 1;
          cfg.k = cfg.kind == BlockKind::HarmoniousBottleneck
                      ? clamp_contraction(h, spec.max_contraction)
                      : 1;
          cfg.spatial_kernel = spec.spatial_kernel;
          cfg.body_kernel = spec.body_kernel;
          cfg.residual = spec.hbo_residual;
          cfg.skip_identity_expansion = spec.skip_identity_expansion;
          Layer l;
          l.name = base + std::to_string(j);
          l.kind = LayerKind::Block;
          l.stage = stage;
          l.cfg = cfg;
          try {
            l.params = make_block_params(cfg, l.name);
          } catch (const ConfigError& e) {
            throw ConfigError("stage row " + std::to_string(i) + ": " + e.what());
          }
          net.layers.push_back(std::move(l));
          c = co;
          h /= cfg.stride;
        }
        break;
      }
      case StageOp::AvgPool: {
        Layer l;
        l.name = base;
        l.kind = LayerKind::GlobalPool;
        l.stage = stage;
        net.layers.push_back(std::move(l));
        h = 1;
        break;
      }
      case StageOp::Classifier:
        single(ConvUnit("", ConvKernel::pointwise(c, spec.num_classes), 1, false, false, true),
               LayerKind::Classifier);
        c = spec.num_classes;
        break;
    }
  }
  int uid = 0;
  for (ConvUnit* u : net.units()) u->uid = uid++;
  if (init) init_weights(net, seed);
  return net;
}

inline bool has_stage(const NetworkSpec& spec, StageOp op) {
  for (const auto& st : spec.stages)
    if (st.op == op) return true;
  return false;
}

inline Network build_hbonet(const NetworkSpec& spec, std::uint64_t seed = 0,
                            bool init = true) {
  if (!has_stage(spec, StageOp::HBO)) throw ConfigError("HBONet table has no hbo rows");
  return build_network(spec, seed, init);
}

inline Network build_mobilenetv2(const NetworkSpec& spec, std::uint64_t seed = 0,
                                 bool init = true) {
  if (has_stage(spec, StageOp::HBO)) throw ConfigError("MobileNetV2 table has hbo rows");
  if (!has_stage(spec, StageOp::InvertedResidual)) {
    throw ConfigError("MobileNetV2 table has no inverted_residual rows");
  }
  return build_network(spec, seed, init);
}

struct TraceRow {
  std::string name;
  int stage = 0;
  Shape shape;
};

// Symbolic per-layer output shapes for a batch-1 square input.
inline std::vector<TraceRow> trace_shapes(const Network& net, int resolution) {
  ShapeOps ops;
  std::vector<TraceRow> rows;
  net.run(ops, Shape{1, 3, resolution, resolution}, [&](std::size_t i, const Shape& s) {
    rows.push_back({net.layers[i].name, net.layers[i].stage, s});
  });
  return rows;
}

// Output shape of each stage-table row (its last layer).
inline std::vector<TraceRow> stage_outputs(const std::vector<TraceRow>& trace) {
  std::vector<TraceRow> out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (i + 1 == trace.size() || trace[i + 1].stage != trace[i].stage) out.push_back(trace[i]);
  }
  return out;
}

}  // namespace hbo
