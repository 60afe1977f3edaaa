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

#include "qecd/tensor/optim.h"

#include <cmath>

namespace qecd {

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Shape shape, std::vector<T> values) {
  if (params_.count(name) != 0) {
    throw StateError("duplicate parameter name: " + name);
  }
  auto [it, inserted] = params_.emplace(name, Tensor<T>::parameter(std::move(shape), std::move(values)));
  return it->second;
}

template <typename T>
Tensor<T>& ParamStore<T>::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw StateError("unknown parameter: " + name);
  }
  return it->second;
}

template <typename T>
const Tensor<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw StateError("unknown parameter: " + name);
  }
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

template <typename T>
void ParamStore<T>::clear_grad() {
  for (auto& [name, t] : params_) t.clear_grad();
}

template <typename T>
OptimizerState make_optimizer_state(const ParamStore<T>& params) {
  OptimizerState state;
  for (const auto& [name, t] : params.items()) {
    state.momentum[name].assign(t.numel(), 0.0f);
  }
  return state;
}

template <typename T>
void lion_step(ParamStore<T>& params, OptimizerState& state, double lr, const LionConfig& cfg) {
  if (!(lr > 0.0)) {
    throw ParameterError("lion_step: learning rate must be positive, got " + std::to_string(lr));
  }
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T step = static_cast<T>(lr);
  const T wd = static_cast<T>(cfg.weight_decay);
  for (auto& [name, p] : params.items()) {
    auto it = state.momentum.find(name);
    if (it == state.momentum.end()) {
      throw StateError("lion_step: no momentum buffer for " + name);
    }
    std::vector<float>& m = it->second;
    if (m.size() != p.numel()) {
      throw StateError("lion_step: momentum for " + name + " has " + std::to_string(m.size()) +
                       " elements, parameter has " + std::to_string(p.numel()));
    }
    const bool has_grad = p.has_grad();
    auto g = p.grad();
    auto v = p.values_mut();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const T gi = has_grad ? g[i] : T(0);
      const T mi = static_cast<T>(m[i]);
      const T c = b1 * mi + (T(1) - b1) * gi;
      const T sign = c > T(0) ? T(1) : (c < T(0) ? T(-1) : T(0));
      v[i] -= step * (sign + wd * v[i]);
      m[i] = static_cast<float>(b2 * mi + (T(1) - b2) * gi);
    }
  }
  ++state.step_count;
}

template <typename T>
double global_grad_norm(const ParamStore<T>& params) {
  double sq = 0.0;
  for (const auto& [name, p] : params.items()) {
    if (!p.has_grad()) continue;
    for (T g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm) {
  if (!(max_norm > 0.0)) {
    throw ParameterError("clip_grad_norm: max_norm must be positive");
  }
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& [name, p] : params.items()) {
      if (!p.has_grad()) continue;
      for (T& g : p.grad_mut()) g *= factor;
    }
  }
  return norm;
}

EmaWeights::EmaWeights(const ParamStore<float>& params, double decay) : decay_(decay) {
  if (decay < 0.0 || decay > 1.0) {
    throw ParameterError("EMA decay must lie in [0, 1]");
  }
  for (const auto& [name, p] : params.items()) {
    shadow_[name].assign(p.values().begin(), p.values().end());
  }
}

void EmaWeights::update(const ParamStore<float>& params) {
  const double a = decay_;
  const double b = 1.0 - decay_;
  for (const auto& [name, p] : params.items()) {
    auto it = shadow_.find(name);
    if (it == shadow_.end() || it->second.size() != p.numel()) {
      throw StateError("EMA shadow does not match parameter " + name);
    }
    auto v = p.values();
    std::vector<float>& s = it->second;
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = static_cast<float>(a * s[i] + b * v[i]);
    }
  }
}

ParamStore<float> EmaWeights::materialize(const ParamStore<float>& like) const {
  ParamStore<float> out;
  for (const auto& [name, p] : like.items()) {
    auto it = shadow_.find(name);
    if (it == shadow_.end() || it->second.size() != p.numel()) {
      throw StateError("EMA shadow does not match parameter " + name);
    }
    out.add(name, p.shape(), it->second);
  }
  return out;
}

template class ParamStore<float>;
template class ParamStore<double>;
template OptimizerState make_optimizer_state(const ParamStore<float>&);
template OptimizerState make_optimizer_state(const ParamStore<double>&);
template void lion_step(ParamStore<float>&, OptimizerState&, double, const LionConfig&);
template void lion_step(ParamStore<double>&, OptimizerState&, double, const LionConfig&);
template double global_grad_norm(const ParamStore<float>&);
template double global_grad_norm(const ParamStore<double>&);
template double clip_grad_norm(ParamStore<float>&, double);
template double clip_grad_norm(ParamStore<double>&, double);

}  // namespace qecd
