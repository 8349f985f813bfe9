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
#include <cstddef>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hbo {

// Error taxonomy. Every failure the library reports is one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or channel groupings that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Architecture / block / stage-table configuration that cannot be built.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Scalar argument out of its domain (e.g. upsample factor < 1).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Kernel shapes the optimized paths do not implement (even depthwise k).
class UnsupportedKernelError : public Error {
 public:
  using Error::Error;
};

// Bad input data (labels out of range, truncated golden files).
class DataError : public Error {
 public:
  using Error::Error;
};

// API misuse: non-scalar loss, mismatched optimizer state.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Divergence during training; carries the global step index.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Worker count for internal loops, read once from HBO_NUM_THREADS.
inline std::size_t num_threads() {
  static const std::size_t n = [] {
    const char* env = std::getenv("HBO_NUM_THREADS");
    if (env == nullptr) return std::size_t{1};
    const long v = std::strtol(env, nullptr, 10);
    return v > 0 ? static_cast<std::size_t>(v) : std::size_t{1};
  }();
  return n;
}

// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker,
// so per-index results are identical to the sequential loop.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min(num_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t wkr = 0; wkr < workers; ++wkr) {
    const std::size_t lo = wkr * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
}

}  // namespace hbo
