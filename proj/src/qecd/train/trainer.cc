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

#include "qecd/train/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "qecd/decoder/inference.h"
#include "qecd/noise/noise_model.h"
#include "qecd/util/errors.h"
#include "qecd/util/seed.h"

namespace qecd {
namespace {

constexpr const char* kMetricsHeader = "iter,loss,lr,grad_norm,eval_acc,wall_ms";

std::string ckpt_name(long iter) {
  std::ostringstream os;
  os << "ckpt_" << std::setw(8) << std::setfill('0') << iter << ".ckpt";
  return os.str();
}

// Keeps the header and every row whose iteration is at most `iter`.
void truncate_metrics(const std::string& path, long iter) {
  std::ifstream in(path);
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (keep.empty()) {
      keep.push_back(line);
      continue;
    }
    if (line.empty()) continue;
    if (std::stol(line.substr(0, line.find(','))) <= iter) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << "\n";
}

}  // namespace

Trainer::Trainer(TrainConfig cfg) : Trainer(cfg, DecoderNet<float>(cfg.d, cfg.hyperparams())) {
  net_.initialize(derive_seed(cfg_.seed, "init"));
  opt_ = make_optimizer_state(net_.params());
  ema_ = EmaWeights(net_.params(), cfg_.ema_decay);
}

Trainer::Trainer(TrainConfig cfg, DecoderNet<float> net) : cfg_(std::move(cfg)), net_(std::move(net)) {
  cfg_.validate();
}

Trainer Trainer::resume(const Checkpoint& ckpt, std::optional<TrainConfig> cfg) {
  if (!ckpt.metadata.contains("train") || !ckpt.metadata.contains("iter")) {
    throw CheckpointError("checkpoint has no training state to resume from");
  }
  TrainConfig stored = TrainConfig::from_json(ckpt.metadata.at("train"));
  TrainConfig use = cfg.value_or(stored);
  Trainer t(use, decoder_from_checkpoint(ckpt, use.mixer, use.d));
  t.iter_ = ckpt.metadata.at("iter").get<long>();
  t.clip_events_ = ckpt.metadata.value("clip_events", 0L);
  t.opt_ = make_optimizer_state(t.net_.params());
  t.opt_.step_count = ckpt.metadata.value("lion_steps", std::uint64_t{0});
  t.ema_ = EmaWeights(t.net_.params(), use.ema_decay);
  for (const auto& [name, param] : t.net_.params().items()) {
    auto m = ckpt.records.find("lion/" + name);
    auto e = ckpt.records.find("ema/" + name);
    if (m == ckpt.records.end() || e == ckpt.records.end()) {
      throw CheckpointError("checkpoint lacks optimizer or EMA state for " + name);
    }
    if (m->second.values.size() != param.numel() || e->second.values.size() != param.numel()) {
      throw CheckpointError("optimizer or EMA state for " + name + " has the wrong size");
    }
    t.opt_.momentum[name] = m->second.values;
    t.ema_.shadow()[name] = e->second.values;
  }
  return t;
}

Trainer Trainer::finetune(const Checkpoint& base, TrainConfig cfg) {
  Trainer t(cfg, decoder_from_checkpoint(base, cfg.mixer, cfg.d));
  t.opt_ = make_optimizer_state(t.net_.params());
  t.ema_ = EmaWeights(t.net_.params(), cfg.ema_decay);
  return t;
}

const FrameSimulator& Trainer::simulator(int cycles) {
  auto& slot = sims_[cycles];
  if (!slot) {
    StabilizerCircuit c = annotate_si1000(build_memory_circuit(build_layout(cfg_.d), cfg_.basis, cycles),
                                          NoiseParams{cfg_.p, cfg_.idle_noise});
    slot = std::make_unique<FrameSimulator>(c);
  }
  return *slot;
}

SyndromeBatch Trainer::make_batch(long iter) {
  const long it = cfg_.fixed_data ? 0 : iter;
  int cycles = cfg_.training_cycles();
  if (cfg_.regime == "curriculum") {
    const std::vector<int> set = curriculum_cycles(it, cfg_.curriculum);
    StreamRng pick(derive_seed(derive_seed(cfg_.seed, "cycles"), static_cast<std::uint64_t>(it)));
    cycles = set[pick.below(static_cast<std::uint32_t>(set.size()))];
  }
  SyndromeBatch b = simulator(cycles).sample(static_cast<std::size_t>(cfg_.batch),
                                             derive_seed(derive_seed(cfg_.seed, "data"), static_cast<std::uint64_t>(it)),
                                             cfg_.threads);
  if (cfg_.labels == "shuffled") {
    StreamRng rng(derive_seed(derive_seed(cfg_.seed, "shuffle"), static_cast<std::uint64_t>(iter)));
    for (std::size_t i = b.labels.size(); i > 1; --i) {
      std::swap(b.labels[i - 1], b.labels[rng.below(static_cast<std::uint32_t>(i))]);
    }
  }
  return b;
}

StepStats Trainer::step() {
  SyndromeBatch batch = make_batch(iter_);
  StepStats s;
  s.cycles = batch.meta.cycles;
  s.lr = cosine_lr(iter_, cfg_.lr_init, cfg_.lr_min, cfg_.resolved_t_max());
  ParamStore<float>& params = net_.params();
  params.zero_grad();
  {
    Tape<float> tape;
    std::vector<float> labels(batch.labels.begin(), batch.labels.end());
    Tensor<float> loss = bce_with_logits(net_.forward_logits(batch.events, batch.shots(), batch.rows),
                                         std::span<const float>(labels));
    s.loss = loss.item();
    if (!std::isfinite(s.loss)) {
      throw NumericError("non-finite loss at iteration " + std::to_string(iter_));
    }
    tape.backward(loss);
  }
  s.grad_norm = global_grad_norm(params);
  if (!std::isfinite(s.grad_norm)) {
    throw NumericError("non-finite gradient norm at iteration " + std::to_string(iter_));
  }
  clip_grad_norm(params, cfg_.clip);
  s.post_clip_norm = global_grad_norm(params);
  s.clipped = s.grad_norm > cfg_.clip;
  clip_events_ += s.clipped;
  lion_step(params, opt_, s.lr, LionConfig{cfg_.beta1, cfg_.beta2, cfg_.weight_decay});
  ema_.update(params);
  params.clear_grad();
  s.iter = ++iter_;
  return s;
}

DecoderNet<float> Trainer::ema_net() const {
  DecoderNet<float> out(cfg_.d, net_.hyperparams());
  out.params().assign_from(ema_.materialize(net_.params()));
  return out;
}

const SyndromeBatch& Trainer::eval_batch() {
  if (!eval_) {
    eval_ = simulator(cfg_.training_cycles())
                .sample(static_cast<std::size_t>(cfg_.eval_shots), derive_seed(cfg_.seed, "eval"),
                        cfg_.threads);
  }
  return *eval_;
}

double Trainer::evaluate(bool use_ema) {
  const SyndromeBatch& b = eval_batch();
  if (use_ema) return accuracy(predict(ema_net(), b, cfg_.threads), b.labels);
  return accuracy(predict(net_, b, cfg_.threads), b.labels);
}

double Trainer::evaluate_loss(bool use_ema) {
  const SyndromeBatch& b = eval_batch();
  std::vector<float> p = use_ema ? predict(ema_net(), b, cfg_.threads) : predict(net_, b, cfg_.threads);
  double sum = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(static_cast<double>(p[i]), 1e-7, 1 - 1e-7);
    sum -= b.labels[i] ? std::log(q) : std::log1p(-q);
  }
  return sum / static_cast<double>(p.size());
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck = decoder_checkpoint(net_);
  ck.metadata["train"] = cfg_.to_json();
  ck.metadata["iter"] = iter_;
  ck.metadata["lion_steps"] = opt_.step_count;
  ck.metadata["clip_events"] = clip_events_;
  ck.metadata["p"] = cfg_.p;
  for (const auto& [name, param] : net_.params().items()) {
    ck.records["lion/" + name] = {param.shape(), opt_.momentum.at(name)};
    ck.records["ema/" + name] = {param.shape(), ema_.shadow().at(name)};
  }
  return ck;
}

TrainSummary Trainer::run(const std::string& out_dir,
                          const std::function<void(const std::string&)>& log) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string metrics = (fs::path(out_dir) / "metrics.csv").string();
  if (iter_ == 0 || !fs::exists(metrics)) {
    std::ofstream(metrics, std::ios::trunc) << kMetricsHeader << "\n";
  } else {
    truncate_metrics(metrics, iter_);
  }
  std::ofstream csv(metrics, std::ios::app);
  csv.precision(9);
  TrainSummary summary;
  const auto start = std::chrono::steady_clock::now();
  double window_loss = 0;
  long window = 0;
  auto save = [&] {
    const std::string path = (fs::path(out_dir) / ckpt_name(iter_)).string();
    const Checkpoint ck = checkpoint();
    save_checkpoint(path, ck);
    save_checkpoint((fs::path(out_dir) / "last.ckpt").string(), ck);
    summary.checkpoints.push_back(path);
    if (log) log("checkpoint " + path);
  };
  while (iter_ < cfg_.iterations) {
    StepStats s = step();
    window_loss += s.loss;
    ++window;
    summary.last_loss = s.loss;
    const bool last = iter_ == cfg_.iterations;
    const bool do_eval = iter_ % cfg_.eval_every == 0 || last;
    if (iter_ % cfg_.log_every == 0 || do_eval) {
      std::string acc;
      if (do_eval) {
        summary.last_eval_accuracy = evaluate(true);
        acc = std::to_string(summary.last_eval_accuracy);
      }
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      csv << iter_ << "," << window_loss / window << "," << s.lr << "," << s.grad_norm << "," << acc
          << "," << static_cast<long>(ms) << "\n";
      csv.flush();
      if (log) {
        log("iter " + std::to_string(iter_) + " loss " + std::to_string(window_loss / window) +
            (acc.empty() ? "" : " eval_acc " + acc));
      }
      window_loss = 0;
      window = 0;
    }
    if (iter_ % cfg_.ckpt_every == 0 || last) save();
  }
  if (summary.checkpoints.empty()) save();
  summary.iterations = iter_;
  summary.clip_events = clip_events_;
  return summary;
}

DecoderNet<float> inference_decoder(const Checkpoint& ckpt, std::optional<MixerKind> expect_mixer,
                                    std::optional<int> expect_d) {
  DecoderNet<float> net = decoder_from_checkpoint(ckpt, expect_mixer, expect_d);
  bool any = false;
  for (const auto& [name, param] : net.params().items()) {
    any = any || ckpt.records.count("ema/" + name) > 0;
  }
  if (!any) return net;
  Checkpoint shadow = ckpt;
  for (const auto& [name, param] : net.params().items()) {
    auto e = ckpt.records.find("ema/" + name);
    if (e == ckpt.records.end()) throw CheckpointError("checkpoint lacks EMA weights for " + name);
    shadow.records[name] = e->second;
  }
  return decoder_from_checkpoint(shadow, expect_mixer, expect_d);
}

}  // namespace qecd
