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


// hbo: complexity ledgers, shape traces, inference, gradient checks and toy
// training from the command line.
//
// Exit codes: 0 success, 1 tolerance or check failure, 2 usage error.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hbo/complexity.hpp"
#include "hbo/gradcheck.hpp"
#include "hbo/network.hpp"
#include "hbo/presets.hpp"
#include "hbo/train.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NetFlags {
  std::string preset = "hbonet";
  std::string spec_path;
  std::optional<double> width;
  std::optional<int> resolution;
  std::optional<int> variant;
  std::optional<int> divisor;
  std::optional<int> classes;

  void add(CLI::App* app) {
    app->add_option("--preset", preset, "Built-in table: hbonet or mobilenetv2")
        ->check(CLI::IsMember({"hbonet", "mobilenetv2"}));
    app->add_option("--spec", spec_path, "Network spec JSON file (overrides --preset)")
        ->check(CLI::ExistingFile);
    app->add_option("--width", width, "Width multiplier")->check(CLI::PositiveNumber);
    app->add_option("--resolution", resolution, "Input resolution in pixels")
        ->check(CLI::PositiveNumber);
    app->add_option("--variant", variant, "Maximum spatial contraction units per block")
        ->check(CLI::Range(1, 3));
    app->add_option("--divisor", divisor, "Channel divisor, overriding the width policy")
        ->check(CLI::IsMember({2, 4, 8}));
    app->add_option("--classes", classes, "Number of classes")->check(CLI::PositiveNumber);
  }

  hbo::NetworkSpec resolve() const {
    hbo::NetworkSpec s;
    if (!spec_path.empty()) {
      s = hbo::load_network_spec(spec_path);
    } else {
      auto p = hbo::presets::by_name(preset);
      if (!p) throw UsageError("unknown preset '" + preset + "'");
      s = *p;
    }
    if (width) s.width = *width;
    if (resolution) s.resolution = *resolution;
    if (variant) s.max_contraction = *variant;
    if (divisor) s.divisor = *divisor;
    if (classes) s.num_classes = *classes;
    s.validate();
    return s;
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write " + path);
  os << text;
}

int run_analyze(const NetFlags& nf, const std::string& csv, const std::string& json,
                std::optional<double> expect, double tol_pct) {
  const hbo::NetworkSpec spec = nf.resolve();
  const hbo::CostLedger L = hbo::ledger(spec);
  std::cout << spec.name << " width " << spec.width << " @" << spec.resolution
            << " divisor " << spec.effective_divisor() << " variant " << spec.max_contraction
            << "\n"
            << hbo::format_table(L);
  if (!csv.empty()) write_file(csv, hbo::to_csv(L));
  if (!json.empty()) write_file(json, hbo::to_json(L).dump(2) + "\n");
  if (expect) {
    const double dev = hbo::mflops_deviation(L.total_macs, *expect);
    const bool ok = hbo::within_tolerance(L.total_macs, *expect, tol_pct / 100.0);
    std::cout << std::fixed << std::setprecision(2) << (ok ? "PASS" : "FAIL") << ": "
              << L.mflops() << " MFLOPs vs expected " << *expect << " (" << 100.0 * dev
              << "%, tolerance " << tol_pct << "%)\n";
    return ok ? kOk : kCheckFailed;
  }
  return kOk;
}

int run_trace(const NetFlags& nf, bool stages_only) {
  const hbo::NetworkSpec spec = nf.resolve();
  const hbo::Network net = hbo::build_network(spec, 0, false);
  auto rows = hbo::trace_shapes(net, spec.resolution);
  if (stages_only) rows = hbo::stage_outputs(rows);
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(32) << r.name << hbo::shape_hwc(r.shape) << "\n";
  }
  return kOk;
}

int run_infer(const NetFlags& nf, int batch, std::uint64_t seed) {
  const hbo::NetworkSpec spec = nf.resolve();
  const hbo::Network net = hbo::build_network(spec, seed);
  hbo::Tensor x({batch, 3, spec.resolution, spec.resolution});
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> d(0.0, 1.0);
  for (double& v : x.data()) v = d(rng);
  const hbo::Tensor y = net.forward(x);
  std::cout << "logits " << y.n() << "x" << y.c() << "\n" << std::setprecision(10);
  for (int i = 0; i < y.n(); ++i) {
    const double* row = y.plane(i, 0);
    int arg = 0;
    for (int k = 1; k < y.c(); ++k) arg = row[k] > row[arg] ? k : arg;
    std::cout << "sample " << i << " argmax " << arg << " logit " << row[arg] << "\n";
  }
  return kOk;
}

int run_gradcheck(std::uint64_t seed, double tol, bool verbose) {
  bool ok = true;
  auto report = [&](const std::string& group, const std::vector<hbo::gradcheck::CheckResult>& rs) {
    const double w = hbo::gradcheck::worst(rs);
    ok = ok && w < tol;
    std::cout << std::scientific << std::setprecision(2) << (w < tol ? "PASS " : "FAIL ")
              << group << ": max rel error " << w << "\n";
    if (verbose) {
      for (const auto& r : rs) {
        std::cout << "    " << r.name << " " << r.report.max_rel_error << " ("
                  << r.report.coords_checked << " coords)\n";
      }
    }
  };
  report("ops", hbo::gradcheck::check_ops(seed));
  for (const auto& c : hbo::gradcheck::standard_block_cases()) {
    report(c.name, hbo::gradcheck::check_block(c.cfg, c.input, c.training, seed + 10));
  }
  return ok ? kOk : kCheckFailed;
}

int run_train(const NetFlags& nf, hbo::train::TrainConfig cfg, const std::string& log_path) {
  hbo::NetworkSpec base = nf.resolve();
  hbo::NetworkSpec spec = hbo::train::toy_spec(base);
  if (nf.width) spec.width = *nf.width;
  if (nf.divisor) spec.divisor = *nf.divisor;
  spec.validate();
  const hbo::train::TrainLog log = hbo::train::train_toy(spec, cfg);
  std::cout << log.to_csv();
  if (!log_path.empty()) write_file(log_path, log.to_csv());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HBONet toolkit: complexity ledgers, shape traces, inference, gradient checks "
               "and toy training"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", "hbo 1.0.0");

  NetFlags analyze_flags, trace_flags, infer_flags, dump_flags, train_flags;
  std::string csv, json;
  std::optional<double> expect;
  double tol = 3.0;
  auto* analyze = app.add_subcommand("analyze", "Per-layer MACs and parameter ledger");
  analyze_flags.add(analyze);
  analyze->add_option("--csv", csv, "Write the ledger as CSV");
  analyze->add_option("--json", json, "Write the ledger as JSON");
  analyze->add_option("--expect-mflops", expect, "Expected total; exit 1 outside tolerance");
  analyze->add_option("--tol", tol, "Tolerance in percent")->capture_default_str();

  bool stages_only = false;
  auto* trace = app.add_subcommand("trace", "Per-layer output shapes");
  trace_flags.add(trace);
  trace->add_flag("--stages", stages_only, "Only the last layer of each table row");

  int batch = 1;
  std::uint64_t seed = 0;
  auto* infer = app.add_subcommand("infer", "Forward a seeded random batch");
  infer_flags.add(infer);
  infer->add_option("--batch", batch, "Batch size")->check(CLI::PositiveNumber);
  infer->add_option("--seed", seed, "Weight and input seed");

  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-5;
  bool gc_verbose = false;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference checks of ops and blocks");
  gc->add_option("--seed", gc_seed, "Seed for inputs and parameters");
  gc->add_option("--tol", gc_tol, "Maximum relative error")->capture_default_str();
  gc->add_flag("-v,--verbose", gc_verbose, "Print every check");

  hbo::train::TrainConfig tc;
  std::string log_path;
  auto* tr = app.add_subcommand("train-toy", "Train a small HBONet on synthetic stripes");
  train_flags.add(tr);
  tr->add_option("--epochs", tc.epochs, "Epochs")->capture_default_str();
  tr->add_option("--batch", tc.batch_size, "Batch size")->capture_default_str();
  tr->add_option("--lr", tc.base_lr, "Base learning rate")->capture_default_str();
  tr->add_option("--momentum", tc.momentum, "SGD momentum")->capture_default_str();
  tr->add_option("--weight-decay", tc.weight_decay, "Weight decay")->capture_default_str();
  tr->add_option("--label-smoothing", tc.label_smoothing, "Label smoothing")
      ->capture_default_str();
  tr->add_option("--seed", tc.seed, "Training seed")->capture_default_str();
  tr->add_option("--samples", tc.data.samples, "Dataset size")->capture_default_str();
  tr->add_option("--noise", tc.data.noise, "Background noise std")->capture_default_str();
  tr->add_option("--amplitude", tc.data.amplitude, "Stripe amplitude")->capture_default_str();
  tr->add_option("--period", tc.data.period, "Stripe period in pixels")->capture_default_str();
  tr->add_option("--data-seed", tc.data.seed, "Dataset seed")->capture_default_str();
  tr->add_option("--log", log_path, "Write the CSV log to a file");

  bool dump_pretty = true;
  auto* dump = app.add_subcommand("dump-spec", "Print the resolved network spec as JSON");
  dump_flags.add(dump);
  dump->add_flag("--pretty,!--compact", dump_pretty, "Indent the JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*analyze) return run_analyze(analyze_flags, csv, json, expect, tol);
    if (*trace) return run_trace(trace_flags, stages_only);
    if (*infer) return run_infer(infer_flags, batch, seed);
    if (*gc) return run_gradcheck(gc_seed, gc_tol, gc_verbose);
    if (*tr) return run_train(train_flags, tc, log_path);
    if (*dump) {
      std::cout << hbo::to_json(dump_flags.resolve()).dump(dump_pretty ? 2 : -1) << "\n";
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const hbo::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const hbo::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const hbo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
  return kUsage;
}
