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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qecd/code/layout.h"
#include "qecd/decoder/decoder_net.h"
#include "qecd/eval/stats.h"
#include "qecd/noise/batch.h"

namespace qecd {

/// Sampling setup shared by the memory and real-time protocols. Every
/// endpoint is sampled from the same seed.
struct EvalSpec {
  int d = 3;
  Basis basis = Basis::kZ;
  double p = 0.002;
  bool idle_noise = true;
  std::size_t shots = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::size_t chunk = 256;
};

struct InjectionEvent {
  int round = 0;
  double p_dec = 0;
};

struct EndpointResult {
  int cycles = 0;
  std::size_t shots = 0;
  std::size_t correct = 0;
  double fidelity = 0;
  Interval accuracy_ci;
  std::vector<float> predictions;
  std::vector<std::uint8_t> labels;
};

struct EvalResult {
  std::string mode;  // "memory" or "realtime"
  int d = 0;
  double p = 0;
  double p_dec = 0;
  int block_cycles = 0;
  int total_cycles = 0;
  std::vector<InjectionEvent> injections;
  std::vector<EndpointResult> endpoints;
  std::optional<LerFit> fit;  // absent when fewer than two usable points
  std::string fit_error;

  /// Summary without per-shot predictions.
  nlohmann::json to_json() const;
};

/// Batches for each cycle count in `cycles` (ascending), with decoder noise
/// `p_dec` after every multiple of `block_cycles` when block_cycles > 0.
std::vector<SyndromeBatch> sample_endpoints(const EvalSpec& spec, const std::vector<int>& cycles,
                                            double p_dec, int block_cycles);

/// Decodes batches that share one syndrome prefix. The hidden state is
/// advanced once along the longest batch and branched at every shorter
/// endpoint, where that batch's final-readout row is fed instead. A null
/// `net` is the constant "no flip" predictor (P_L = 0). Throws
/// ReproducibilityError if a batch's rows are not a prefix of the longest.
std::vector<EndpointResult> decode_endpoints(const DecoderNet<float>* net,
                                             const std::vector<SyndromeBatch>& batches,
                                             unsigned threads = 0, std::size_t chunk = 256);

/// Memory experiment at each cycle count, then the LER fit over them.
EvalResult memory_eval(const DecoderNet<float>* net, const EvalSpec& spec, const std::vector<int>& cycles);

/// Real-time protocol: 8d+4 cycles as four blocks of 2d+1, decoder noise
/// from `schedule` (or `p_dec_override`) injected after each block, fidelity
/// at the four block endpoints and the LER fit across them. Throws
/// CheckpointError if the decoder was built for another distance.
EvalResult realtime_eval(const DecoderNet<float>* net, const EvalSpec& spec, MixerKind schedule,
                         double alpha = 7.623e-6, std::optional<double> p_dec_override = std::nullopt);

/// Cycle counts at which the real-time protocol reads out: k(2d+1), k=1..4.
std::vector<int> realtime_endpoints(int d);

}  // namespace qecd
