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

#include "qecd/train/train_config.h"

#include <algorithm>

#include <set>
#include <vector>

#include "qecd/util/errors.h"

namespace qecd {

TrainConfig TrainConfig::finetune_defaults(TrainConfig base) {
  base.iterations = 250000;
  base.lr_init = 2e-6;
  base.lr_min = std::min(base.lr_min, base.lr_init);
  base.t_max = 64e6 / base.batch;
  return base;
}

Hyperparams TrainConfig::hyperparams() const {
  nlohmann::json j = Hyperparams::for_distance(d, mixer).to_json();
  for (const auto& [k, v] : model.items()) j[k] = v;
  j["mixer"] = mixer_name(mixer);
  return Hyperparams::from_json(j);
}

void TrainConfig::validate() const {
  std::vector<std::string> bad;
  if (d < 3 || d % 2 == 0) bad.push_back("d must be odd and >= 3");
  if (!(p >= 0 && p <= 1.0 / 5.0)) bad.push_back("p must lie in [0, 0.2]");
  if (batch <= 0) bad.push_back("batch must be positive");
  if (iterations < 0) bad.push_back("iterations must be >= 0");
  if (!(lr_init > 0)) bad.push_back("lr_init must be positive");
  if (!(lr_min >= 0) || lr_min > lr_init) bad.push_back("lr_min must lie in [0, lr_init]");
  if (t_max < 0) bad.push_back("t_max must be >= 0");
  if (weight_decay < 0) bad.push_back("weight_decay must be >= 0");
  if (!(clip > 0)) bad.push_back("clip must be positive");
  if (!(ema_decay >= 0 && ema_decay <= 1)) bad.push_back("ema_decay must lie in [0, 1]");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) bad.push_back("betas must lie in [0, 1)");
  if (regime != "realtime" && regime != "curriculum") bad.push_back("regime must be realtime or curriculum");
  if (cycles < 0) bad.push_back("cycles must be >= 0");
  if (curriculum.stride <= 0 || curriculum.initial <= 0 || curriculum.added < 0 ||
      curriculum.max_cycles < 1) {
    bad.push_back("curriculum fields must be positive");
  }
  if (log_every <= 0 || eval_every <= 0 || ckpt_every <= 0) bad.push_back("cadences must be positive");
  if (eval_shots <= 0) bad.push_back("eval_shots must be positive");
  if (labels != "true" && labels != "shuffled") bad.push_back("labels must be true or shuffled");
  try {
    hyperparams();
  } catch (const ParameterError& e) {
    bad.push_back(e.what());
  }
  if (!bad.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ParameterError(msg);
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"d", d},
          {"basis", basis_name(basis)},
          {"p", p},
          {"idle_noise", idle_noise},
          {"mixer", mixer_name(mixer)},
          {"model", model},
          {"batch", batch},
          {"iterations", iterations},
          {"lr_init", lr_init},
          {"lr_min", lr_min},
          {"t_max", resolved_t_max()},
          {"weight_decay", weight_decay},
          {"clip", clip},
          {"ema_decay", ema_decay},
          {"beta1", beta1},
          {"beta2", beta2},
          {"regime", regime},
          {"cycles", training_cycles()},
          {"curriculum",
           {{"stride", curriculum.stride},
            {"initial", curriculum.initial},
            {"added", curriculum.added},
            {"max_cycles", curriculum.max_cycles}}},
          {"seed", seed},
          {"log_every", log_every},
          {"eval_every", eval_every},
          {"ckpt_every", ckpt_every},
          {"eval_shots", eval_shots},
          {"labels", labels},
          {"fixed_data", fixed_data}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ParameterError("training config must be a JSON object");
  static const std::set<std::string> known = {
      "d",         "basis",      "p",          "idle_noise", "mixer",      "model",
      "batch",     "iterations", "lr_init",    "lr_min",     "t_max",      "weight_decay",
      "clip",      "ema_decay",  "beta1",      "beta2",      "regime",     "cycles",
      "curriculum", "seed",      "log_every",  "eval_every", "ckpt_every", "eval_shots",
      "threads",   "labels",     "fixed_data"};
  std::vector<std::string> unknown;
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown training config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ParameterError(msg);
  }
  try {
    c.d = j.value("d", c.d);
    if (j.contains("basis")) c.basis = parse_basis(j.at("basis").get<std::string>());
    c.p = j.value("p", c.p);
    c.idle_noise = j.value("idle_noise", c.idle_noise);
    if (j.contains("mixer")) c.mixer = parse_mixer(j.at("mixer").get<std::string>());
    if (j.contains("model")) c.model = j.at("model");
    c.batch = j.value("batch", c.batch);
    c.iterations = j.value("iterations", c.iterations);
    c.lr_init = j.value("lr_init", c.lr_init);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.t_max = j.value("t_max", c.t_max);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.clip = j.value("clip", c.clip);
    c.ema_decay = j.value("ema_decay", c.ema_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.regime = j.value("regime", c.regime);
    c.cycles = j.value("cycles", c.cycles);
    if (j.contains("curriculum")) {
      const auto& k = j.at("curriculum");
      c.curriculum.stride = k.value("stride", c.curriculum.stride);
      c.curriculum.initial = k.value("initial", c.curriculum.initial);
      c.curriculum.added = k.value("added", c.curriculum.added);
      c.curriculum.max_cycles = k.value("max_cycles", c.curriculum.max_cycles);
    }
    c.seed = j.value("seed", c.seed);
    c.log_every = j.value("log_every", c.log_every);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.ckpt_every = j.value("ckpt_every", c.ckpt_every);
    c.eval_shots = j.value("eval_shots", c.eval_shots);
    c.threads = j.value("threads", c.threads);
    c.labels = j.value("labels", c.labels);
    c.fixed_data = j.value("fixed_data", c.fixed_data);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("training config: ") + e.what());
  }
  return c;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig()); }

}  // namespace qecd
