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

#include <optional>
#include <string>

#include "hbo/network.hpp"

// Canonical stage tables, embedded so tools need no data files. They are
// byte-identical copies of specs/hbonet.json and specs/mobilenetv2.json.
namespace hbo::presets {

inline constexpr const char* kHbonetJson = R"json(
{
  "format_version": 1,
  "name": "hbonet",
  "width": 1.0,
  "resolution": 224,
  "num_classes": 1000,
  "divisor": {
    "default": 8,
    "by_width": [
      {"width": 0.1, "divisor": 4},
      {"width": 0.25, "divisor": 2},
      {"width": 0.5, "divisor": 2}
    ]
  },
  "exact_at_unit_width": true,
  "max_contraction": 1,
  "spatial_kernel": 3,
  "body_kernel": 5,
  "hbo_residual": true,
  "skip_identity_expansion": false,
  "stages": [
    {"operator": "conv3x3", "t": 1, "c": 32, "n": 1, "s": 2},
    {"operator": "hbo", "t": 1, "c": 20, "n": 1, "s": 1},
    {"operator": "hbo", "t": 2, "c": 36, "n": 1, "s": 1},
    {"operator": "hbo", "t": 2, "c": 72, "n": 3, "s": 2},
    {"operator": "hbo", "t": 2, "c": 96, "n": 4, "s": 2},
    {"operator": "hbo", "t": 2, "c": 192, "n": 4, "s": 2},
    {"operator": "hbo", "t": 2, "c": 288, "n": 1, "s": 1},
    {"operator": "conv1x1_linear", "t": 1, "c": 144, "n": 1, "s": 1},
    {"operator": "inverted_residual", "t": 6, "c": 200, "n": 2, "s": 2},
    {"operator": "inverted_residual", "t": 6, "c": 400, "n": 1, "s": 1},
    {"operator": "conv1x1", "t": 1, "c": 1600, "n": 1, "s": 1, "keep_below_unit_width": true},
    {"operator": "avgpool", "t": 1, "c": 0, "n": 1, "s": 1},
    {"operator": "classifier", "t": 1, "c": 0, "n": 1, "s": 1}
  ]
}
)json";

inline constexpr const char* kMobilenetV2Json = R"json(
{
  "format_version": 1,
  "name": "mobilenetv2",
  "width": 1.0,
  "resolution": 224,
  "num_classes": 1000,
  "divisor": {
    "default": 8,
    "by_width": [
      {"width": 0.1, "divisor": 4}
    ]
  },
  "exact_at_unit_width": false,
  "max_contraction": 1,
  "spatial_kernel": 3,
  "body_kernel": 3,
  "hbo_residual": true,
  "skip_identity_expansion": true,
  "stages": [
    {"operator": "conv3x3", "t": 1, "c": 32, "n": 1, "s": 2},
    {"operator": "inverted_residual", "t": 1, "c": 16, "n": 1, "s": 1},
    {"operator": "inverted_residual", "t": 6, "c": 24, "n": 2, "s": 2},
    {"operator": "inverted_residual", "t": 6, "c": 32, "n": 3, "s": 2},
    {"operator": "inverted_residual", "t": 6, "c": 64, "n": 4, "s": 2},
    {"operator": "inverted_residual", "t": 6, "c": 96, "n": 3, "s": 1},
    {"operator": "inverted_residual", "t": 6, "c": 160, "n": 3, "s": 2},
    {"operator": "inverted_residual", "t": 6, "c": 320, "n": 1, "s": 1},
    {"operator": "conv1x1", "t": 1, "c": 1280, "n": 1, "s": 1, "keep_below_unit_width": true},
    {"operator": "avgpool", "t": 1, "c": 0, "n": 1, "s": 1},
    {"operator": "classifier", "t": 1, "c": 0, "n": 1, "s": 1}
  ]
}
)json";

inline NetworkSpec hbonet(double width = 1.0, int resolution = 224, int num_classes = 1000) {
  NetworkSpec s = parse_network_spec(std::string(kHbonetJson));
  s.width = width;
  s.resolution = resolution;
  s.num_classes = num_classes;
  s.validate();
  return s;
}

inline NetworkSpec mobilenetv2(double width = 1.0, int resolution = 224,
                               int num_classes = 1000) {
  NetworkSpec s = parse_network_spec(std::string(kMobilenetV2Json));
  s.width = width;
  s.resolution = resolution;
  s.num_classes = num_classes;
  s.validate();
  return s;
}

inline std::optional<NetworkSpec> by_name(const std::string& name) {
  if (name == "hbonet") return hbonet();
  if (name == "mobilenetv2") return mobilenetv2();
  return std::nullopt;
}

}  // namespace hbo::presets
