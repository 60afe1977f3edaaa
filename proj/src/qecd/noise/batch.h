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
#include <string>
#include <vector>

#include <json.hpp>

#include "qecd/code/layout.h"

namespace qecd {

struct BatchMeta {
  int d = 0;
  int cycles = 0;
  Basis basis = Basis::kZ;
  double p = 0.0;
  bool idle_noise = true;
  double p_dec = 0.0;
  int block_cycles = 0;
  std::vector<int> injection_rounds;
  std::uint64_t seed = 0;
  std::size_t shots = 0;
  std::string source = "circuit";  // "circuit" or "dem"

  nlohmann::json to_json() const;
  static BatchMeta from_json(const nlohmann::json& j);
};

/// Detection events [shots, cycles+1, d^2-1] and logical-flip labels
/// [shots], one byte per bit in memory.
struct SyndromeBatch {
  BatchMeta meta;
  std::size_t rows = 0;
  std::size_t slots = 0;
  std::vector<std::uint8_t> events;
  std::vector<std::uint8_t> labels;

  std::size_t shots() const { return labels.size(); }
  std::size_t shot_stride() const { return rows * slots; }
  std::uint8_t event(std::size_t shot, std::size_t row, std::size_t slot) const {
    return events[(shot * rows + row) * slots + slot];
  }
  const std::uint8_t* shot_events(std::size_t shot) const {
    return events.data() + shot * shot_stride();
  }

  /// Throws DataError if array sizes disagree with rows/slots/metadata.
  void validate() const;
};

/// Mean of all event bits. Throws ParameterError on an empty batch.
double detection_fraction(const SyndromeBatch& batch);

/// `.synb`: one JSON header line, then the event bits packed LSB-first in
/// row-major order, padded to a byte boundary, then the label bits likewise.
void write_synb(const std::string& path, const SyndromeBatch& batch);
SyndromeBatch read_synb(const std::string& path);

/// CSV with header "shot,label,events"; events is the row-major bit string.
void write_batch_csv(const std::string& path, const SyndromeBatch& batch);

}  // namespace qecd
