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

#include "qecd/noise/batch.h"
#include "qecd/noise/frame_sim.h"

namespace qecd {

struct ErrorMechanism {
  double probability = 0.0;
  std::vector<std::uint32_t> detectors;  // sorted
  bool observable = false;
};

struct DetectorErrorModel {
  std::size_t num_detectors = 0;
  std::vector<ErrorMechanism> mechanisms;
};

/// Enumerates every (site, Pauli) of the circuit, propagates it with the
/// frame simulator and merges mechanisms with identical symptoms. Each
/// depolarizing channel is rewritten exactly as independent Pauli channels:
/// q = (1 - sqrt(1 - 4p/3)) / 2 for one qubit, q = (1 - (1 - 16p/15)^(1/8)) / 2
/// for two. Mechanisms that flip nothing are dropped.
DetectorErrorModel extract_dem(const FrameSimulator& sim);

/// Independent Bernoulli draw per mechanism, XORed into the shot. Shot i uses
/// a stream derived from (seed, i). Throws ParameterError for a probability
/// outside [0, 1] or a detector index >= rows * slots.
SyndromeBatch dem_sample(const DetectorErrorModel& dem, std::size_t rows, std::size_t slots,
                         std::size_t shots, std::uint64_t seed, unsigned threads = 1);

}  // namespace qecd
