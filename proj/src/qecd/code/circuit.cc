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

#include "qecd/code/circuit.h"

#include <algorithm>
#include <sstream>

#include "qecd/util/errors.h"

namespace qecd {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kR: return "R";
    case OpKind::kRX: return "RX";
    case OpKind::kH: return "H";
    case OpKind::kCX: return "CX";
    case OpKind::kM: return "M";
    case OpKind::kMX: return "MX";
    case OpKind::kDepolarize1: return "DEPOLARIZE1";
    case OpKind::kDepolarize2: return "DEPOLARIZE2";
  }
  return "?";
}

const char* noise_class_name(NoiseClass c) {
  switch (c) {
    case NoiseClass::kNone: return "none";
    case NoiseClass::kSingleQubit: return "single_qubit";
    case NoiseClass::kTwoQubit: return "two_qubit";
    case NoiseClass::kReset: return "reset";
    case NoiseClass::kMeasurementFlip: return "measurement_flip";
    case NoiseClass::kMeasurementDepolarize: return "measurement_depolarize";
    case NoiseClass::kIdle: return "idle";
    case NoiseClass::kDecoder: return "decoder";
  }
  return "?";
}

std::uint32_t StabilizerCircuit::ancilla_measurement(int round, std::size_t slot) const {
  return static_cast<std::uint32_t>(static_cast<std::size_t>(round - 1) * num_slots() + slot);
}

std::uint32_t StabilizerCircuit::data_measurement(std::size_t q) const {
  return static_cast<std::uint32_t>(static_cast<std::size_t>(cycles) * num_slots() + q);
}

std::array<int, 4> cx_order(const Stabilizer& s) {
  // corners: NW, NE, SW, SE
  if (s.kind == Basis::kZ) return {s.corners[0], s.corners[1], s.corners[2], s.corners[3]};
  return {s.corners[0], s.corners[2], s.corners[1], s.corners[3]};
}

StabilizerCircuit build_memory_circuit(const CodeLayout& layout, Basis basis, int cycles) {
  if (cycles < 1) {
    throw ParameterError("cycle count must be >= 1, got " + std::to_string(cycles));
  }
  StabilizerCircuit c;
  c.layout = layout;
  c.basis = basis;
  c.cycles = cycles;
  c.num_qubits = layout.num_qubits();
  const std::size_t l = layout.num_stabilizers();
  const std::size_t nd = layout.num_data();

  std::vector<std::uint32_t> data_targets(nd);
  for (std::size_t q = 0; q < nd; ++q) data_targets[q] = static_cast<std::uint32_t>(q);
  std::vector<std::uint32_t> ancillas(l);
  std::vector<std::uint32_t> x_ancillas;
  for (std::size_t s = 0; s < l; ++s) {
    ancillas[s] = static_cast<std::uint32_t>(layout.ancilla(s));
    if (layout.stabilizers[s].kind == Basis::kX) x_ancillas.push_back(ancillas[s]);
  }

  c.ops.push_back({basis == Basis::kZ ? OpKind::kR : OpKind::kRX, data_targets, 0.0,
                   NoiseClass::kNone, 0});
  for (int r = 1; r <= cycles; ++r) {
    c.ops.push_back({OpKind::kR, ancillas, 0.0, NoiseClass::kNone, r});
    c.ops.push_back({OpKind::kH, x_ancillas, 0.0, NoiseClass::kNone, r});
    for (int layer = 0; layer < 4; ++layer) {
      Op cx{OpKind::kCX, {}, 0.0, NoiseClass::kNone, r};
      for (const Stabilizer& s : layout.stabilizers) {
        const int q = cx_order(s)[layer];
        if (q < 0) continue;
        const auto anc = static_cast<std::uint32_t>(layout.ancilla(s.index));
        // X checks copy their ancilla onto the data; Z checks collect data parity.
        if (s.kind == Basis::kX) {
          cx.targets.push_back(anc);
          cx.targets.push_back(static_cast<std::uint32_t>(q));
        } else {
          cx.targets.push_back(static_cast<std::uint32_t>(q));
          cx.targets.push_back(anc);
        }
      }
      c.ops.push_back(std::move(cx));
    }
    c.ops.push_back({OpKind::kH, x_ancillas, 0.0, NoiseClass::kNone, r});
    c.ops.push_back({OpKind::kM, ancillas, 0.0, NoiseClass::kNone, r});
  }
  c.ops.push_back({basis == Basis::kZ ? OpKind::kM : OpKind::kMX, data_targets, 0.0,
                   NoiseClass::kNone, cycles + 1});
  c.num_measurements = static_cast<std::size_t>(cycles) * l + nd;

  c.detectors.resize(c.num_rows() * l);
  for (std::size_t s = 0; s < l; ++s) {
    const Stabilizer& stab = layout.stabilizers[s];
    const bool in_basis = stab.kind == basis;
    if (in_basis) c.detectors[s] = {c.ancilla_measurement(1, s)};
    for (int row = 1; row < cycles; ++row) {
      c.detectors[static_cast<std::size_t>(row) * l + s] = {c.ancilla_measurement(row, s),
                                                            c.ancilla_measurement(row + 1, s)};
    }
    if (in_basis) {
      auto& det = c.detectors[static_cast<std::size_t>(cycles) * l + s];
      for (std::size_t q : stab.support) det.push_back(c.data_measurement(q));
      det.push_back(c.ancilla_measurement(cycles, s));
    }
  }
  for (std::size_t q : layout.logical_support(basis)) c.observable.push_back(c.data_measurement(q));
  return c;
}

std::string dump_circuit(const StabilizerCircuit& circuit) {
  std::ostringstream os;
  int current = -1;
  for (const Op& op : circuit.ops) {
    if (op.round != current) {
      if (current >= 0) os << "\n";
      current = op.round;
      os << "ROUND " << current;
    }
    os << " | " << op_name(op.kind);
    if (op.prob != 0.0 || op.kind == OpKind::kDepolarize1 || op.kind == OpKind::kDepolarize2) {
      os << "(" << op.prob << ")";
    }
    for (std::uint32_t t : op.targets) os << " " << t;
  }
  os << "\n";
  for (const auto& det : circuit.detectors) {
    os << "DETECTOR";
    for (std::uint32_t m : det) os << " " << m;
    os << "\n";
  }
  os << "OBSERVABLE";
  for (std::uint32_t m : circuit.observable) os << " " << m;
  os << "\n";
  return os.str();
}

CircuitStats circuit_stats(const StabilizerCircuit& circuit) {
  CircuitStats st;
  st.qubits = circuit.num_qubits;
  st.measurements = circuit.num_measurements;
  st.detectors = circuit.detectors.size();
  for (const Op& op : circuit.ops) {
    const bool pairs = op.kind == OpKind::kCX || op.kind == OpKind::kDepolarize2;
    st.gate_counts[op_name(op.kind)] += pairs ? op.targets.size() / 2 : op.targets.size();
  }
  return st;
}

}  // namespace qecd
