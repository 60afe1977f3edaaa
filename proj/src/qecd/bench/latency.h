// Copyright 2026 The QECD Authors
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

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qecd/util/mixer_kind.h"

namespace qecd {

/// Where and how a benchmark ran. Always attached to results.
struct EnvDescriptor {
  std::string host;
  std::string cpu;
  std::string compiler;
  unsigned threads = 1;
  bool multithreaded = false;
  int eigen_threads = 1;
  std::string timestamp;  // UTC, ISO 8601

  static EnvDescriptor capture(unsigned threads);
  nlohmann::json to_json() const;
  /// Throws DataError if a required field is missing.
  static EnvDescriptor from_json(const nlohmann::json& j);
};

struct BenchSample {
  int d = 0;
  int l = 0;  // d^2 - 1
  double median_ms = 0;
  double iqr_ms = 0;
  int reps = 0;
  int inner = 1;  // forwards per timed repetition after timer widening
};

struct ExponentFit {
  double k = 0;
  double intercept = 0;  // log time at log d = 0
  double ci_low = 0;     // NaN with fewer than three points
  double ci_high = 0;
  std::vector<int> window;  // distances used
};

struct BenchResult {
  MixerKind kind = MixerKind::kMamba;
  int d_model = 256;
  int batch = 1;
  int warmup = 10;
  std::vector<BenchSample> samples;
  EnvDescriptor env;

  nlohmann::json to_json() const;
  /// Throws DataError on missing fields, including the environment.
  static BenchResult from_json(const nlohmann::json& j);
};

struct BenchConfig {
  int d_model = 256;
  int reps = 30;
  int warmup = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  // Timer widening: a median below `min_ticks` clock ticks multiplies the
  // forwards per repetition by 10, up to `max_inner`.
  int min_ticks = 50;
  int max_inner = 100000;
};

/// Times one isolated mixer block (x + Mixer(LN x)) at batch 1 on seeded
/// random input [1, d^2-1, d_model] for each d. Input data for a given d is
/// identical across kinds. Throws ParameterError on an unsorted d list or
/// reps < 30, and NumericError if the timer cannot be widened enough.
BenchResult bench_block(MixerKind kind, const std::vector<int>& d_list, const BenchConfig& cfg = {});

/// Least-squares slope of log(time) on log(d) over the largest ceil(n/2)
/// distances. Needs at least four distances spanning a factor of three;
/// non-positive times are a DataError.
ExponentFit fit_scaling_exponent(const BenchResult& result);

/// Synthetic result t = c d^k (1 + noise * N(0,1)) for self-tests.
BenchResult synthetic_bench(MixerKind kind, const std::vector<int>& d_list, double k, double c,
                            double noise = 0.0, std::uint64_t seed = 0);

/// The input a benchmark feeds at distance d.
std::vector<float> bench_input(int d, int d_model, std::uint64_t seed);

}  // namespace qecd
