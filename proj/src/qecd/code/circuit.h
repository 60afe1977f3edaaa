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

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qecd/code/layout.h"

namespace qecd {

enum class OpKind : std::uint8_t { kR, kRX, kH, kCX, kM, kMX, kDepolarize1, kDepolarize2 };

/// Which noise source an op (or the flip probability of a measurement)
/// belongs to. Samplers key their random streams on this.
enum class NoiseClass : std::uint8_t {
  kNone,
  kSingleQubit,
  kTwoQubit,
  kReset,
  kMeasurementFlip,
  kMeasurementDepolarize,
  kIdle,
  kDecoder,
};

const char* op_name(OpKind kind);
const char* noise_class_name(NoiseClass c);

/// One circuit layer. CX targets are (control, target) pairs; DEPOLARIZE2
/// targets are pairs too. For M/MX, `prob` is the classical flip rate.
struct Op {
  OpKind kind = OpKind::kR;
  std::vector<std::uint32_t> targets;
  double prob = 0.0;
  NoiseClass noise = NoiseClass::kNone;
  int round = 0;
};

/// Memory experiment: round 0 prepares the data qubits, rounds 1..n extract
/// every stabilizer once, round n+1 measures the data qubits.
///
/// Measurement record: ancilla of slot s in round k (1-based) is
/// (k-1)*l + s; data qubit q is n*l + q.
///
/// Detectors are laid out as an (n+1) x l table, index row*l + slot. Row 0
/// holds first-round events, rows 1..n-1 compare consecutive rounds, row n
/// compares the data readout with the last round. Off-basis slots of rows 0
/// and n have empty measurement sets and never fire.
struct StabilizerCircuit {
  CodeLayout layout;
  Basis basis = Basis::kZ;
  int cycles = 0;
  std::vector<Op> ops;
  std::size_t num_qubits = 0;
  std::size_t num_measurements = 0;
  std::vector<std::vector<std::uint32_t>> detectors;
  std::vector<std::uint32_t> observable;
  // Rounds after which decoder noise was inserted, ascending.
  std::vector<int> injection_rounds;

  std::size_t num_slots() const { return layout.num_stabilizers(); }
  std::size_t num_rows() const { return static_cast<std::size_t>(cycles) + 1; }
  std::uint32_t ancilla_measurement(int round, std::size_t slot) const;
  std::uint32_t data_measurement(std::size_t q) const;
};

/// Throws ParameterError if cycles < 1.
StabilizerCircuit build_memory_circuit(const CodeLayout& layout, Basis basis, int cycles);

/// CX partner of each stabilizer in each of the four CX layers: Z checks
/// visit NW, NE, SW, SE and X checks NW, SW, NE, SE. Entry is -1 when the
/// corner is off the lattice.
std::array<int, 4> cx_order(const Stabilizer& s);

/// Text form, one line per round:
///   ROUND r | KIND t0 t1 ... | KIND(prob) ...
/// followed by "DETECTOR m ..." lines in detector order and one
/// "OBSERVABLE m ..." line.
std::string dump_circuit(const StabilizerCircuit& circuit);

struct CircuitStats {
  std::size_t qubits = 0;
  // Gate applications by op name: CX counts pairs, single-qubit kinds count
  // targets, noise channels count sites.
  std::map<std::string, std::size_t> gate_counts;
  std::size_t measurements = 0;
  std::size_t detectors = 0;
};

CircuitStats circuit_stats(const StabilizerCircuit& circuit);

}  // namespace qecd
