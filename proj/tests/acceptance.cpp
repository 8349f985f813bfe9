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


// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hbo/complexity.hpp"
#include "hbo/gradcheck.hpp"
#include "hbo/presets.hpp"
#include "hbo/train.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
};

struct Expectation {
  std::string label;
  hbo::NetworkSpec spec;
  double mflops;
};

constexpr double kMflopsTol = 0.03;

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void check_totals(Outcome& o, const std::vector<Expectation>& rows) {
  int failed = 0;
  for (const auto& e : rows) {
    const hbo::CostLedger L = hbo::ledger(e.spec);
    const double dev = hbo::mflops_deviation(L.total_macs, e.mflops);
    if (std::abs(dev) > kMflopsTol) {
      ++failed;
      o.pass = false;
      o.detail << " " << e.label << "=" << std::fixed << std::setprecision(2) << L.mflops()
               << "/" << e.mflops << "(" << std::showpos << 100 * dev << std::noshowpos << "%)";
    }
  }
  o.detail << " [" << rows.size() - failed << "/" << rows.size() << " within 3%]";
}

hbo::NetworkSpec hbonet(double w, int r = 224, std::optional<int> divisor = {}, int k = 1) {
  hbo::NetworkSpec s = hbo::presets::hbonet(w, r);
  s.divisor = divisor;
  s.max_contraction = k;
  s.validate();
  return s;
}

Outcome criterion_table2() {
  Outcome o;
  const auto t0 = Clock::now();
  std::vector<Expectation> rows;
  const double hw[] = {1.0, 0.8, 0.5, 0.35, 0.25, 0.1};
  const double hm[] = {305, 205, 96, 61, 37, 14};
  const double mw[] = {1.0, 0.75, 0.5, 0.35, 0.25, 0.1};
  const double mm[] = {300, 209, 97, 59, 37, 13};
  for (int i = 0; i < 6; ++i) {
    rows.push_back({"HBONet(" + num(hw[i]) + ")", hbonet(hw[i]), hm[i]});
  }
  for (int i = 0; i < 6; ++i) {
    rows.push_back(
        {"MobileNetV2(" + num(mw[i]) + ")", hbo::presets::mobilenetv2(mw[i]), mm[i]});
  }
  check_totals(o, rows);
  const double s = seconds_since(t0);
  if (s >= 1.0) o.pass = false;
  o.detail << " runtime " << std::fixed << std::setprecision(3) << s << "s (< 1s)";
  return o;
}

Outcome criterion_resolution() {
  Outcome o;
  std::vector<Expectation> rows;
  const int res[] = {224, 192, 160, 128, 96};
  const double a[] = {205, 150, 105, 68, 39};
  const double b[] = {61, 45, 31, 21, 12};
  for (int i = 0; i < 5; ++i) {
    rows.push_back({"0.8@" + std::to_string(res[i]), hbonet(0.8, res[i]), a[i]});
    rows.push_back({"0.35@" + std::to_string(res[i]), hbonet(0.35, res[i]), b[i]});
  }
  check_totals(o, rows);
  return o;
}

Outcome criterion_cross() {
  Outcome o;
  check_totals(o, {{"0.6@192", hbonet(0.6, 192, 8), 98}, {"0.5@224", hbonet(0.5, 224, 8), 108}});
  return o;
}

Outcome criterion_cascade() {
  Outcome o;
  check_totals(o, {{"k=1", hbonet(0.25, 224, 8, 1), 44},
                   {"k=2", hbonet(0.25, 224, 8, 2), 45},
                   {"k=3", hbonet(0.25, 224, 8, 3), 45}});
  return o;
}

Outcome criterion_trace() {
  Outcome o;
  const hbo::Network net = hbo::build_hbonet(hbonet(1.0), 0, false);
  const auto stages = hbo::stage_outputs(hbo::trace_shapes(net, 224));
  const int h[] = {112, 112, 112, 56, 28, 14, 14, 14, 7, 7, 7, 1, 1};
  const int c[] = {32, 20, 36, 72, 96, 192, 288, 144, 200, 400, 1600, 1600, 1000};
  if (stages.size() != 13) {
    o.pass = false;
    o.detail << " got " << stages.size() << " checkpoints";
    return o;
  }
  int matched = 0;
  for (int i = 0; i < 13; ++i) {
    const hbo::Shape& s = stages[static_cast<std::size_t>(i)].shape;
    if (s.h == h[i] && s.w == h[i] && s.c == c[i]) {
      ++matched;
    } else {
      o.pass = false;
      o.detail << " " << stages[static_cast<std::size_t>(i)].name << "=" << hbo::shape_hwc(s);
    }
  }
  o.detail << " [" << matched << "/13 checkpoints exact]";
  return o;
}

Outcome criterion_oracle() {
  Outcome o;
  std::mt19937_64 rng(2026);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  double worst = 0.0;
  int cases = 0;
  for (int i = 0; i < 150; ++i) {
    const int kind = i % 3;  // depthwise, pointwise, standard
    const int n = pick(1, 2), c = pick(1, 6), h = pick(3, 9), w = pick(3, 9);
    const int stride = kind == 1 ? 1 : pick(1, 2);
    const int k = kind == 1 ? 1 : (pick(0, 1) ? 3 : 5);
    const int co = kind == 0 ? c : pick(1, 7);
    const int pad = (k - 1) / 2;
    hbo::ConvKernel kern(co, kind == 0 ? 1 : c, k, k, kind == 0 ? c : 1);
    for (double& v : kern.data) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    hbo::Tensor x({n, c, h, w});
    for (double& v : x.data()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const hbo::Tensor want = hbo::conv2d_oracle(x, kern, stride, pad);
    const hbo::Tensor got = kind == 0 ? hbo::nn::depthwise_conv(x, kern, stride)
                            : kind == 1 ? hbo::nn::pointwise_conv(x, kern)
                                        : hbo::nn::conv2d(x, kern, stride, pad);
    worst = std::max(worst, hbo::max_abs_diff(want, got));
    ++cases;
  }
  if (worst > 1e-12) o.pass = false;
  o.detail << " " << cases << " randomized convs, max abs diff " << std::scientific
           << std::setprecision(2) << worst << " (<= 1e-12);";

  const hbo::Network net = hbo::build_hbonet(hbonet(0.25, 96), 3);
  const hbo::CostLedger L = hbo::ledger(net, 96);
  hbo::EagerOps ops(false, true);
  hbo::Tensor x({1, 3, 96, 96});
  for (double& v : x.data()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  net.run(ops, x);
  std::size_t equal = 0;
  for (std::size_t i = 0; i < std::min(ops.mac_log.size(), L.rows.size()); ++i) {
    equal += ops.mac_log[i].macs == L.rows[i].macs;
  }
  const bool macs_ok = ops.mac_log.size() == L.rows.size() && equal == L.rows.size();
  if (!macs_ok) o.pass = false;
  o.detail << " MAC counter equals ledger on " << equal << "/" << L.rows.size()
           << " layers of HBONet(0.25)@96";
  return o;
}

Outcome criterion_gradients() {
  Outcome o;
  const auto t0 = Clock::now();
  constexpr double kTol = 1e-5;
  const auto ops = hbo::gradcheck::check_ops(1);
  double worst = hbo::gradcheck::worst(ops);
  std::size_t checks = ops.size();
  for (const auto& r : ops) {
    if (r.report.max_rel_error >= kTol) o.detail << " " << r.name;
  }
  for (const auto& c : hbo::gradcheck::standard_block_cases()) {
    const auto rs = hbo::gradcheck::check_block(c.cfg, c.input, c.training, 11);
    checks += rs.size();
    const double w = hbo::gradcheck::worst(rs);
    if (w >= kTol) o.detail << " " << c.name;
    worst = std::max(worst, w);
  }
  const double s = seconds_since(t0);
  o.pass = worst < kTol && s < 120.0;
  o.detail << " " << checks << " checks, max rel error " << std::scientific
           << std::setprecision(2) << worst << " (< 1e-5), runtime " << std::fixed
           << std::setprecision(1) << s << "s (< 120s)";
  return o;
}

Outcome criterion_training() {
  Outcome o;
  const auto t0 = Clock::now();
  const hbo::train::TrainConfig cfg;  // reference configuration
  const hbo::NetworkSpec spec = hbo::train::toy_spec(hbo::presets::hbonet());
  const hbo::train::TrainLog a = hbo::train::train_toy(spec, cfg);
  const hbo::train::TrainLog b = hbo::train::train_toy(spec, cfg);
  const double acc = a.rows.back().accuracy;
  std::vector<double> loss;
  for (std::size_t e = 1; e < a.rows.size() && e <= 20; ++e) loss.push_back(a.rows[e].loss);
  const auto smooth = hbo::train::moving_average(loss, 5);
  int rises = 0;
  for (std::size_t i = 1; i < smooth.size(); ++i) rises += smooth[i] > smooth[i - 1];
  const bool same = a == b;
  o.pass = acc > 0.9 && rises == 0 && same && cfg.epochs <= 40;
  o.detail << " " << cfg.epochs << " epochs at lr " << cfg.base_lr << ": final train accuracy "
           << std::fixed << std::setprecision(3) << acc << " (> 0.900), smoothed loss rises "
           << rises << " times in epochs 1-20 (0 allowed), rerun "
           << (same ? "bitwise identical" : "DIFFERS") << "; " << std::setprecision(0)
           << seconds_since(t0) << "s";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "complexity totals by width", criterion_table2},
      {2, "complexity totals by resolution", criterion_resolution},
      {3, "cross width/resolution totals", criterion_cross},
      {4, "cascade contraction variants", criterion_cascade},
      {5, "stage shape trace", criterion_trace},
      {6, "oracle equivalence and MAC counter", criterion_oracle},
      {7, "gradient correctness", criterion_gradients},
      {8, "toy training", criterion_training},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " exception: " << e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title
              << "):" << o.detail.str() << std::endl;
  }
  std::cout << "INFO criterion 9 (large-scale accuracies): not reproducible at this scale; "
               "criteria 6-8 stand in for them"
            << std::endl;
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
