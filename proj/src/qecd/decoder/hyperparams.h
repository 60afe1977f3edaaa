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
#include <string>
#include <vector>

#include <json.hpp>

#include "qecd/util/mixer_kind.h"

namespace qecd {

/// Architecture sizes for one decoder. Defaults are the real-time column of
/// the reference configuration; `for_distance` fills in the dilation rates.
struct Hyperparams {
  int d_model = 256;
  int heads = 4;
  int d_b = 48;       // attention block output width before returning to d_model
  int d_attn = 32;    // per-head query/key/value width
  int d_mid = 32;     // recorded for completeness; no layer consumes it
  int d_state = 16;
  int d_conv = 4;
  int w_mamba = 1;
  int l_stab = 2;
  int l_read = 16;
  int d_read = 48;
  int w_gate = 5;
  std::array<int, 3> dilations{1, 1, 1};
  MixerKind mixer = MixerKind::kMamba;
  int layers_per_step = 3;
  double skip_scale = 0.7071;
  bool concat_combine = false;  // combine h and S by concat + projection instead of sum
  bool causal_conv = true;      // depthwise conv1d in the Mamba scan path

  static Hyperparams for_distance(int d, MixerKind mixer);

  /// Mamba expansion width.
  int expand() const { return w_mamba * d_model; }
  /// Rank of the low-rank step-size projection.
  int dt_rank() const { return (d_model + 15) / 16; }

  /// Throws ParameterError listing every invalid field.
  void validate() const;

  nlohmann::json to_json() const;
  static Hyperparams from_json(const nlohmann::json& j);
};

/// Dilation rates for the grid convolutions at distance d. Distances above 7
/// reuse the d = 7 rates.
std::array<int, 3> default_dilations(int d);

}  // namespace qecd
