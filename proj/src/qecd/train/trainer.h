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

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qecd/decoder/decoder_net.h"
#include "qecd/noise/batch.h"
#include "qecd/noise/frame_sim.h"
#include "qecd/tensor/checkpoint.h"
#include "qecd/tensor/optim.h"
#include "qecd/train/train_config.h"

namespace qecd {

struct StepStats {
  long iter = 0;  // iterations completed after this step
  double loss = 0;
  double lr = 0;
  double grad_norm = 0;  // before clipping
  double post_clip_norm = 0;
  bool clipped = false;
  int cycles = 0;
};

struct TrainSummary {
  long iterations = 0;
  long clip_events = 0;
  double last_loss = 0;
  double last_eval_accuracy = -1;
  std::vector<std::string> checkpoints;
};

/// One training run. Every iteration's data is drawn from a seed derived
/// from (seed, iteration), so a run resumed from a checkpoint follows the
/// exact trajectory of an uninterrupted one.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  /// Continues a run from a checkpoint produced by `checkpoint()`. A config
  /// passed in replaces the stored one (e.g. to extend `iterations`).
  static Trainer resume(const Checkpoint& ckpt, std::optional<TrainConfig> cfg = std::nullopt);

  /// Starts from the live weights of `base` with fresh optimizer state and
  /// EMA. Throws CheckpointError if the mixer kind or distance differs.
  static Trainer finetune(const Checkpoint& base, TrainConfig cfg);

  /// Sample -> forward -> loss -> backward -> clip -> Lion -> EMA. Throws
  /// NumericError, leaving parameters untouched, if the loss or gradient is
  /// not finite.
  StepStats step();

  /// Held-out accuracy with the EMA weights (or the live ones).
  double evaluate(bool use_ema = true);
  /// Mean BCE of the EMA (or live) model on the held-out batch.
  double evaluate_loss(bool use_ema = true);

  Checkpoint checkpoint() const;

  /// Trains until `iterations`, appending to `out_dir/metrics.csv` and
  /// writing checkpoints `ckpt_<iter>.ckpt` plus `last.ckpt`. On resume the
  /// metrics file is cut back to the checkpoint's iteration first.
  TrainSummary run(const std::string& out_dir,
                   const std::function<void(const std::string&)>& log = {});

  long iter() const { return iter_; }
  long clip_events() const { return clip_events_; }
  const TrainConfig& config() const { return cfg_; }
  DecoderNet<float>& net() { return net_; }
  const DecoderNet<float>& net() const { return net_; }
  const EmaWeights& ema() const { return ema_; }
  const OptimizerState& optimizer() const { return opt_; }
  DecoderNet<float> ema_net() const;
  const SyndromeBatch& eval_batch();
  /// The training batch for a given iteration.
  SyndromeBatch make_batch(long iter);

 private:
  Trainer(TrainConfig cfg, DecoderNet<float> net);
  const FrameSimulator& simulator(int cycles);

  TrainConfig cfg_;
  DecoderNet<float> net_;
  OptimizerState opt_;
  EmaWeights ema_;
  long iter_ = 0;
  long clip_events_ = 0;
  std::map<int, std::unique_ptr<FrameSimulator>> sims_;
  std::optional<SyndromeBatch> eval_;
};

/// The decoder a checkpoint is meant to be evaluated with: EMA weights when
/// the checkpoint carries them, the live weights otherwise.
DecoderNet<float> inference_decoder(const Checkpoint& ckpt,
                                    std::optional<MixerKind> expect_mixer = std::nullopt,
                                    std::optional<int> expect_d = std::nullopt);

}  // namespace qecd
