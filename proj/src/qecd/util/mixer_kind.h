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

#include <string>

#include "qecd/util/errors.h"

namespace qecd {

/// The mixing block inside each syndrome-mixer layer.
enum class MixerKind { kAttention, kMamba };

inline std::string mixer_name(MixerKind k) { return k == MixerKind::kMamba ? "mamba" : "attention"; }

inline MixerKind parse_mixer(const std::string& s) {
  if (s == "mamba") return MixerKind::kMamba;
  if (s == "attention" || s == "transformer") return MixerKind::kAttention;
  throw ParameterError("unknown mixer '" + s + "' (expected mamba or attention)");
}

}  // namespace qecd
