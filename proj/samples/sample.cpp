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


// Builds HBONet(0.25) at 96x96, prints its cost and stage shapes, and runs a
// forward pass on a random image.

#include <iostream>
#include <random>

#include "hbo/complexity.hpp"
#include "hbo/network.hpp"
#include "hbo/presets.hpp"

int main() {
  const hbo::NetworkSpec spec = hbo::presets::hbonet(0.25, 96, 1000);
  const hbo::Network net = hbo::build_hbonet(spec, /*seed=*/42);

  const hbo::CostLedger cost = hbo::ledger(net);
  std::cout << "HBONet(0.25) @96: " << cost.mflops() << " MFLOPs, " << cost.mparams()
            << " M params\n";
  for (const auto& row : hbo::stage_outputs(hbo::trace_shapes(net, spec.resolution))) {
    std::cout << "  " << row.name << " -> " << hbo::shape_hwc(row.shape) << "\n";
  }

  hbo::Tensor image({1, 3, 96, 96});
  std::mt19937_64 rng(7);
  std::normal_distribution<double> pixel(0.0, 1.0);
  for (double& v : image.data()) v = pixel(rng);
  const hbo::Tensor logits = net.forward(image);
  std::cout << "logits: " << logits.c() << " classes, first " << logits.at(0, 0, 0, 0) << "\n";
}
