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

#include "qecd/code/circuit.h"
#include "qecd/util/mixer_kind.h"

namespace qecd {

/// SI1000 rates derived from one base rate p.
struct NoiseParams {
  double p = 0.0;
  // Depolarize idle qubits during H and CX layers at the single-qubit rate.
  bool idle_noise = true;

  double single_qubit() const { return p / 10.0; }
  double two_qubit() const { return p; }
  double reset() const { return 2.0 * p; }
  double measurement() const { return 5.0 * p; }
  double measurement_depolarize() const { return p; }

  /// Throws ParameterError if any derived rate leaves [0, 1].
  void validate() const;
};

/// Inserts SI1000 channels into a clean memory circuit:
///   reset                   -> DEPOLARIZE1(2p) on the reset qubits
///   H                       -> DEPOLARIZE1(p/10) on the targets
///   CX                      -> DEPOLARIZE2(p) on each pair
///   H and CX layers         -> DEPOLARIZE1(p/10) on every untouched qubit
///   M / MX                  -> result flip with rate 5p, then DEPOLARIZE1(p)
/// Noise ops are emitted even when their rate is zero so that the site
/// layout depends only on the circuit shape.
StabilizerCircuit annotate_si1000(const StabilizerCircuit& clean, const NoiseParams& noise);

/// Decoder-latency noise strength min(alpha * d^exponent, cap).
struct DecoderNoiseSpec {
  double alpha = 7.623e-6;
  int exponent = 2;
  double cap = 1.0;

  static DecoderNoiseSpec for_mixer(MixerKind kind, double alpha = 7.623e-6) {
    return {alpha, kind == MixerKind::kAttention ? 4 : 2, 1.0};
  }
};

double decoder_noise_strength(const DecoderNoiseSpec& spec, int d);

/// Appends DEPOLARIZE1(p_dec) on every data qubit after each round that is a
/// multiple of `block_cycles` (including the last round when it is one).
/// The injected rounds are recorded in circuit.injection_rounds.
StabilizerCircuit inject_decoder_noise(const StabilizerCircuit& circuit, double p_dec,
                                       int block_cycles);

}  // namespace qecd
