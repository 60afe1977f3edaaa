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

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "cli/app.h"
#include "qecd/tensor/checkpoint.h"
#include "qecd/train/trainer.h"
#include "qecd/util/errors.h"

namespace qecd::cli {
namespace {
namespace fs = std::filesystem;

/// Flags shared by train and finetune; each maps onto a TrainConfig field.
void add_train_flags(ConfigFlags& f) {
  f.add("--d", "d", ValueType::kInt, "Code distance");
  f.add("--basis", "basis", ValueType::kString, "Memory basis: z or x");
  f.add("--p", "p", ValueType::kDouble, "SI1000 base error rate of the training data");
  f.add("--idle-noise,!--no-idle-noise", "idle_noise", ValueType::kBool, "Idle depolarization");
  f.add("--mixer", "mixer", ValueType::kString, "Syndrome mixer: mamba or attention");
  f.add("--d-model", "model/d_model", ValueType::kInt, "Model width");
  f.add("--layers-per-step", "model/layers_per_step", ValueType::kInt, "Syndrome-mixer layers per cycle");
  f.add("--batch", "batch", ValueType::kInt, "Shots per iteration");
  f.add("--iterations", "iterations", ValueType::kInt, "Total iterations");
  f.add("--lr-init", "lr_init", ValueType::kDouble, "Initial learning rate");
  f.add("--lr-min", "lr_min", ValueType::kDouble, "Final learning rate");
  f.add("--t-max", "t_max", ValueType::kDouble, "Cosine period in iterations (0: 128e6 / batch)");
  f.add("--weight-decay", "weight_decay", ValueType::kDouble, "Decoupled weight decay");
  f.add("--clip", "clip", ValueType::kDouble, "Global gradient-norm clip");
  f.add("--ema-decay", "ema_decay", ValueType::kDouble, "EMA decay");
  f.add("--regime", "regime", ValueType::kString, "realtime or curriculum");
  f.add("--cycles", "cycles", ValueType::kInt, "Training cycles in the realtime regime (0: 2d+1)");
  f.add("--seed", "seed", ValueType::kInt, "Run seed");
  f.add("--log-every", "log_every", ValueType::kInt, "Metrics row cadence");
  f.add("--eval-every", "eval_every", ValueType::kInt, "Held-out evaluation cadence");
  f.add("--ckpt-every", "ckpt_every", ValueType::kInt, "Checkpoint cadence");
  f.add("--eval-shots", "eval_shots", ValueType::kInt, "Held-out shots");
  f.add("--labels", "labels", ValueType::kString, "true, or shuffled for a no-signal control");
}

/// Trains `trainer` into `out`, then records a manifest listing the
/// metrics log and every checkpoint in the directory.
int run_training(Trainer trainer, const std::string& command, const Invocation& inv,
                 const std::string& out, const std::vector<std::string>& inputs) {
  RunRecorder rec(command, inv.argv, out);
  rec.set_config(trainer.config().to_json(), trainer.config().seed);
  for (const std::string& in : inputs) rec.add_input(in);
  TrainSummary summary;
  try {
    summary = trainer.run(out, [](const std::string& line) { std::cout << line << "\n" << std::flush; });
  } catch (const NumericError&) {
    // Record what was written before the abort, then report it.
    for (const auto& e : fs::directory_iterator(out)) {
      if (e.path().extension() == ".ckpt" || e.path().filename() == "metrics.csv") {
        rec.add_output(e.path().string());
      }
    }
    rec.finish("numeric failure");
    throw;
  }
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(out)) {
    if (e.path().extension() == ".ckpt" || e.path().filename() == "metrics.csv") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  for (const std::string& f : files) rec.add_output(f);
  rec.finish();
  std::printf("done: %ld iterations, %ld clip events, last loss %.5f\n", summary.iterations,
              summary.clip_events, summary.last_loss);
  return kExitOk;
}

class TrainCommand : public Command {
 public:
  TrainCommand(CLI::App* app, bool finetune) : flags_(app), finetune_(finetune) {
    app->add_option("--config", config_, "JSON training config or run manifest");
    app->add_option("--out", out_, "Output directory for metrics and checkpoints")->required();
    threads_opt_ = app->add_option("--threads", threads_, "Worker cap (default $QECD_THREADS, else all cores)");
    app->add_flag("--resume", resume_, "Continue from <out>/last.ckpt");
    if (finetune_) app->add_option("--base", base_, "Checkpoint to fine-tune from");
    add_train_flags(flags_);
  }

  int run(const Invocation& inv) override {
    nlohmann::json user = config_.empty() ? nlohmann::json::object() : load_config(config_);
    flags_.apply(user);
    std::vector<std::string> inputs;
    if (!config_.empty()) inputs.push_back(config_);
    const unsigned threads = cli_threads(threads_opt_, threads_);
    const char* command = finetune_ ? "finetune" : "train";

    if (resume_) {
      const std::string last = (fs::path(out_) / "last.ckpt").string();
      if (!fs::exists(last)) throw DataError("--resume: no checkpoint at " + last);
      const Checkpoint ck = load_checkpoint(last);
      if (!ck.metadata.contains("train")) throw CheckpointError(last + " holds no training state");
      TrainConfig cfg = TrainConfig::from_json(user, TrainConfig::from_json(ck.metadata["train"]));
      cfg.threads = threads;
      cfg.validate();
      std::printf("resuming %s at iteration %ld\n", last.c_str(), ck.metadata["iter"].get<long>());
      inputs.push_back(last);
      return run_training(Trainer::resume(ck, cfg), command, inv, out_, inputs);
    }

    if (!finetune_) {
      TrainConfig cfg = TrainConfig::from_json(user);
      cfg.threads = threads;
      cfg.validate();
      return run_training(Trainer(cfg), command, inv, out_, inputs);
    }

    if (base_.empty()) throw ParameterError("finetune: --base is required");
    if (!flags_.given("p") && !user.contains("p")) throw ParameterError("finetune: --p is required");
    const Checkpoint base = load_checkpoint(base_);
    inputs.push_back(base_);
    TrainConfig origin;
    if (base.metadata.contains("train")) {
      origin = TrainConfig::from_json(base.metadata["train"]);
    } else {
      const nlohmann::json& m = base.metadata;
      if (!m.contains("d") || !m.contains("mixer") || !m.contains("hyperparams")) {
        throw CheckpointError(base_ + " is not a decoder checkpoint");
      }
      origin.d = m["d"].get<int>();
      origin.mixer = parse_mixer(m["mixer"].get<std::string>());
      origin.model = m["hyperparams"];
      origin.model.erase("mixer");
    }
    // The base run's architecture is fixed; only the schedule and data change.
    TrainConfig cfg = TrainConfig::from_json(user, TrainConfig::finetune_defaults(origin));
    cfg.threads = threads;
    cfg.validate();
    return run_training(Trainer::finetune(base, cfg), command, inv, out_, inputs);
  }

 private:
  ConfigFlags flags_;
  bool finetune_;
  std::string config_;
  std::string out_;
  std::string base_;
  bool resume_ = false;
  unsigned threads_ = 0;
  CLI::Option* threads_opt_ = nullptr;
};

}  // namespace

std::unique_ptr<Command> make_train(CLI::App* app) { return std::make_unique<TrainCommand>(app, false); }
std::unique_ptr<Command> make_finetune(CLI::App* app) { return std::make_unique<TrainCommand>(app, true); }

}  // namespace qecd::cli
