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

#include "qecd/decoder/hyperparams.h"

#include "qecd/util/errors.h"

namespace qecd {

std::array<int, 3> default_dilations(int d) {
  if (d <= 3) return {1, 1, 1};
  if (d <= 5) return {1, 1, 2};
  return {1, 2, 4};
}

Hyperparams Hyperparams::for_distance(int d, MixerKind mixer) {
  Hyperparams hp;
  hp.dilations = default_dilations(d);
  hp.mixer = mixer;
  return hp;
}

void Hyperparams::validate() const {
  std::vector<std::string> bad;
  auto positive = [&](const char* name, int v) {
    if (v <= 0) bad.push_back(std::string(name) + "=" + std::to_string(v));
  };
  positive("d_model", d_model);
  positive("heads", heads);
  positive("d_b", d_b);
  positive("d_attn", d_attn);
  positive("d_mid", d_mid);
  positive("d_state", d_state);
  positive("d_conv", d_conv);
  positive("w_mamba", w_mamba);
  positive("d_read", d_read);
  positive("w_gate", w_gate);
  positive("layers_per_step", layers_per_step);
  if (l_stab < 0) bad.push_back("l_stab=" + std::to_string(l_stab));
  if (l_read < 0) bad.push_back("l_read=" + std::to_string(l_read));
  for (int r : dilations) {
    if (r < 1) bad.push_back("dilation=" + std::to_string(r));
  }
  if (!(skip_scale > 0.0)) bad.push_back("skip_scale=" + std::to_string(skip_scale));
  if (!bad.empty()) {
    std::string msg = "invalid hyperparameters:";
    for (const auto& b : bad) msg += " " + b;
    throw ParameterError(msg);
  }
}

nlohmann::json Hyperparams::to_json() const {
  return {{"d_model", d_model},
          {"heads", heads},
          {"d_b", d_b},
          {"d_attn", d_attn},
          {"d_mid", d_mid},
          {"d_state", d_state},
          {"d_conv", d_conv},
          {"w_mamba", w_mamba},
          {"l_stab", l_stab},
          {"l_read", l_read},
          {"d_read", d_read},
          {"w_gate", w_gate},
          {"dilations", dilations},
          {"mixer", mixer_name(mixer)},
          {"layers_per_step", layers_per_step},
          {"skip_scale", skip_scale},
          {"concat_combine", concat_combine},
          {"causal_conv", causal_conv}};
}

Hyperparams Hyperparams::from_json(const nlohmann::json& j) {
  Hyperparams hp;
  try {
    hp.d_model = j.value("d_model", hp.d_model);
    hp.heads = j.value("heads", hp.heads);
    hp.d_b = j.value("d_b", hp.d_b);
    hp.d_attn = j.value("d_attn", hp.d_attn);
    hp.d_mid = j.value("d_mid", hp.d_mid);
    hp.d_state = j.value("d_state", hp.d_state);
    hp.d_conv = j.value("d_conv", hp.d_conv);
    hp.w_mamba = j.value("w_mamba", hp.w_mamba);
    hp.l_stab = j.value("l_stab", hp.l_stab);
    hp.l_read = j.value("l_read", hp.l_read);
    hp.d_read = j.value("d_read", hp.d_read);
    hp.w_gate = j.value("w_gate", hp.w_gate);
    if (j.contains("dilations")) hp.dilations = j.at("dilations").get<std::array<int, 3>>();
    if (j.contains("mixer")) hp.mixer = parse_mixer(j.at("mixer").get<std::string>());
    hp.layers_per_step = j.value("layers_per_step", hp.layers_per_step);
    hp.skip_scale = j.value("skip_scale", hp.skip_scale);
    hp.concat_combine = j.value("concat_combine", hp.concat_combine);
    hp.causal_conv = j.value("causal_conv", hp.causal_conv);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("hyperparameters: ") + e.what());
  }
  hp.validate();
  return hp;
}

}  // namespace qecd
