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
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "qecd/tensor/tensor.h"

namespace qecd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointRecord {
  Shape shape;
  std::vector<float> values;
};

/// In-memory image of a checkpoint file. Records are keyed by name; the
/// conventional prefixes are "ema/" for EMA shadow weights and "lion/" for
/// optimizer momentum.
struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, CheckpointRecord> records;
};

/// Layout: "QECD", u32 version, u32 metadata length, metadata JSON, then per
/// record: u32 name length, name bytes, u32 rank, rank x u32 dims, float32
/// values. All integers and floats little-endian. Writes to a temporary file
/// and renames, so a crash never leaves a truncated checkpoint behind.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Throws CheckpointError on bad magic, unknown version or truncation.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace qecd
