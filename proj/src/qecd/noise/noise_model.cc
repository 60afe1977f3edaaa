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

#include "qecd/noise/noise_model.h"

#include <algorithm>
#include <cmath>

#include "qecd/util/errors.h"

namespace qecd {
namespace {

void check_rate(double r, const char* what) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw ParameterError(std::string(what) + " rate " + std::to_string(r) +
                         " is outside [0, 1]");
  }
}

Op noise_op(OpKind kind, std::vector<std::uint32_t> targets, double prob, NoiseClass cls,
            int round) {
  return Op{kind, std::move(targets), prob, cls, round};
}

}  // namespace

void NoiseParams::validate() const {
  check_rate(p, "base");
  check_rate(single_qubit(), "single-qubit");
  check_rate(two_qubit(), "two-qubit");
  check_rate(reset(), "reset");
  check_rate(measurement(), "measurement");
}

StabilizerCircuit annotate_si1000(const StabilizerCircuit& clean, const NoiseParams& noise) {
  noise.validate();
  StabilizerCircuit out = clean;
  out.ops.clear();
  const std::size_t nq = clean.num_qubits;
  auto idle_targets = [&](const Op& op) {
    std::vector<bool> busy(nq, false);
    for (std::uint32_t t : op.targets) busy[t] = true;
    std::vector<std::uint32_t> idle;
    for (std::size_t q = 0; q < nq; ++q) {
      if (!busy[q]) idle.push_back(static_cast<std::uint32_t>(q));
    }
    return idle;
  };
  for (const Op& op : clean.ops) {
    if (op.noise != NoiseClass::kNone) {
      out.ops.push_back(op);
      continue;
    }
    switch (op.kind) {
      case OpKind::kR:
      case OpKind::kRX:
        out.ops.push_back(op);
        out.ops.push_back(noise_op(OpKind::kDepolarize1, op.targets, noise.reset(),
                                   NoiseClass::kReset, op.round));
        break;
      case OpKind::kH:
      case OpKind::kCX: {
        out.ops.push_back(op);
        if (op.kind == OpKind::kH) {
          out.ops.push_back(noise_op(OpKind::kDepolarize1, op.targets, noise.single_qubit(),
                                     NoiseClass::kSingleQubit, op.round));
        } else {
          out.ops.push_back(noise_op(OpKind::kDepolarize2, op.targets, noise.two_qubit(),
                                     NoiseClass::kTwoQubit, op.round));
        }
        if (noise.idle_noise) {
          auto idle = idle_targets(op);
          if (!idle.empty()) {
            out.ops.push_back(noise_op(OpKind::kDepolarize1, std::move(idle),
                                       noise.single_qubit(), NoiseClass::kIdle, op.round));
          }
        }
        break;
      }
      case OpKind::kM:
      case OpKind::kMX: {
        Op m = op;
        m.prob = noise.measurement();
        m.noise = NoiseClass::kMeasurementFlip;
        out.ops.push_back(m);
        out.ops.push_back(noise_op(OpKind::kDepolarize1, op.targets,
                                   noise.measurement_depolarize(),
                                   NoiseClass::kMeasurementDepolarize, op.round));
        break;
      }
      default:
        out.ops.push_back(op);
    }
  }
  return out;
}

double decoder_noise_strength(const DecoderNoiseSpec& spec, int d) {
  if (d < 1) {
    throw ParameterError("decoder_noise_strength: distance must be positive");
  }
  const double v = spec.alpha * std::pow(static_cast<double>(d), spec.exponent);
  return std::min(v, spec.cap);
}

StabilizerCircuit inject_decoder_noise(const StabilizerCircuit& circuit, double p_dec,
                                       int block_cycles) {
  check_rate(p_dec, "decoder noise");
  if (block_cycles < 1) {
    throw ParameterError("block length must be >= 1");
  }
  StabilizerCircuit out = circuit;
  out.ops.clear();
  out.injection_rounds.clear();
  std::vector<std::uint32_t> data(circuit.layout.num_data());
  for (std::size_t q = 0; q < data.size(); ++q) data[q] = static_cast<std::uint32_t>(q);
  for (std::size_t i = 0; i < circuit.ops.size(); ++i) {
    out.ops.push_back(circuit.ops[i]);
    const int r = circuit.ops[i].round;
    const bool last_of_round = i + 1 == circuit.ops.size() || circuit.ops[i + 1].round != r;
    if (last_of_round && r >= 1 && r <= circuit.cycles && r % block_cycles == 0) {
      out.ops.push_back(noise_op(OpKind::kDepolarize1, data, p_dec, NoiseClass::kDecoder, r));
      out.injection_rounds.push_back(r);
    }
  }
  return out;
}

}  // namespace qecd
