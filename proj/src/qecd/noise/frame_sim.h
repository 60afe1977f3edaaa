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
#include <vector>

#include "qecd/code/circuit.h"
#include "qecd/noise/batch.h"

namespace qecd {

/// One place where a noise channel can act: a single target of a
/// DEPOLARIZE1 op, a pair of a DEPOLARIZE2 op, or one result of a noisy
/// measurement. Sites are numbered in circuit order.
struct NoiseSite {
  std::uint32_t op = 0;
  std::uint32_t offset = 0;  // index into op.targets (first of a pair)
  double prob = 0.0;
  NoiseClass cls = NoiseClass::kNone;
  std::uint8_t outcomes = 0;  // 3, 15, or 1 (measurement flip)
  std::uint32_t group = 0;
};

/// Sites sharing (class, rate), in circuit order. Each shot draws its errors
/// for a group from its own stream, so the errors landing on the first k
/// sites of a group do not depend on anything after them.
struct NoiseGroup {
  NoiseClass cls = NoiseClass::kNone;
  double prob = 0.0;
  std::uint64_t key = 0;
  std::vector<std::uint32_t> sites;
};

/// Pauli code: bit 0 = X component, bit 1 = Z component (1 = X, 2 = Z,
/// 3 = Y). Two-qubit channels use the low two bits for the first qubit and
/// the next two for the second. Measurement flips use code 1.
struct ForcedError {
  std::uint32_t site = 0;
  std::uint8_t pauli = 0;
};

struct BlockOutcome {
  std::vector<std::uint64_t> measurements;  // one word per record entry
  std::vector<std::uint64_t> detectors;     // one word per detector
  std::uint64_t observable = 0;
};

/// Bit-parallel Pauli-frame sampler, 64 shots per machine word. Resets and
/// measurements randomize the frame component they leave undetermined, so
/// any detector that is not actually deterministic shows up as noise.
class FrameSimulator {
 public:
  explicit FrameSimulator(const StabilizerCircuit& circuit);

  const StabilizerCircuit& circuit() const { return circuit_; }
  const std::vector<NoiseSite>& sites() const { return sites_; }
  const std::vector<NoiseGroup>& groups() const { return groups_; }

  /// Shot i uses streams derived from (seed, i) only; blocks of 64 shots are
  /// distributed over `threads` workers. Output is identical for any thread
  /// count.
  SyndromeBatch sample(std::size_t shots, std::uint64_t seed, unsigned threads = 1) const;

  /// Raw outcome of shots [64*block, 64*block + 64) as sample() draws them.
  BlockOutcome sample_block(std::uint64_t seed, std::size_t block) const;

  /// Runs up to 64 lanes with exactly the listed errors and no random noise.
  BlockOutcome run_forced(const std::vector<std::vector<ForcedError>>& lanes,
                          std::uint64_t gauge_seed = 0) const;

 private:
  struct Event {
    std::uint32_t site;
    std::uint32_t lane;
    std::uint8_t pauli;
  };

  void draw_errors(std::uint64_t seed, std::size_t shot, std::uint32_t lane,
                   std::vector<Event>& out) const;
  BlockOutcome run_block(std::vector<Event>& events, std::uint64_t gauge_seed) const;

  StabilizerCircuit circuit_;
  std::vector<NoiseSite> sites_;
  std::vector<NoiseGroup> groups_;
  std::vector<std::uint32_t> op_site_begin_;
};

/// Convenience wrapper: annotated circuit in, batch out.
SyndromeBatch sample_shots(const StabilizerCircuit& circuit, std::size_t shots,
                           std::uint64_t seed, unsigned threads = 1);

}  // namespace qecd
