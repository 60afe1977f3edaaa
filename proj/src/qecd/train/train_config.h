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
#include <string>

#include <json.hpp>

#include "qecd/code/layout.h"
#include "qecd/decoder/hyperparams.h"
#include "qecd/train/schedule.h"

namespace qecd {

/// Everything that determines a training run. Serialized into checkpoints
/// and manifests; `from_json` accepts partial objects over the defaults.
struct TrainConfig {
  int d = 3;
  Basis basis = Basis::kZ;
  double p = 0.002;
  bool idle_noise = true;
  MixerKind mixer = MixerKind::kMamba;
  nlohmann::json model = nlohmann::json::object();  // Hyperparams overrides

  int batch = 256;
  long iterations = 500000;
  double lr_init = 5e-6;
  double lr_min = 1e-6;
  double t_max = 0;  // 0 selects 128e6 / batch
  double weight_decay = 1e-5;
  double clip = 1.0;
  double ema_decay = 0.9999;
  double beta1 = 0.9;
  double beta2 = 0.99;

  // "realtime" trains at a fixed cycle count (2d+1 unless `cycles` is set);
  // "curriculum" draws each batch's cycle count from curriculum_cycles.
  std::string regime = "realtime";
  int cycles = 0;
  CurriculumConfig curriculum;

  std::uint64_t seed = 0;
  long log_every = 100;
  long eval_every = 5000;
  long ckpt_every = 25000;
  int eval_shots = 2048;
  unsigned threads = 0;  // worker cap; not serialized, results do not depend on it

  // Diagnostics: "shuffled" permutes labels within each batch; fixed_data
  // reuses the first batch forever.
  std::string labels = "true";
  bool fixed_data = false;

  /// Fine-tuning defaults layered over `base`: lr 2e-6, 250k iterations,
  /// t_max = 64e6 / batch.
  static TrainConfig finetune_defaults(TrainConfig base);

  Hyperparams hyperparams() const;
  double resolved_t_max() const { return t_max > 0 ? t_max : 128e6 / batch; }
  int training_cycles() const { return cycles > 0 ? cycles : 2 * d + 1; }

  /// Throws ParameterError naming every invalid field.
  void validate() const;
  nlohmann::json to_json() const;
  /// Overlays `j` on `base`. Unknown keys are errors.
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j);
};

}  // namespace qecd
