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

#include "qecd/tensor/tensor.h"

namespace qecd {

/// Named parameter tensors. Iteration order is lexicographic by name, which
/// fixes the order of every reduction over parameters (gradient norm, EMA,
/// checkpoint records).
template <typename T>
class ParamStore {
 public:
  /// Registers a trainable tensor. Duplicate names are a StateError.
  Tensor<T>& add(const std::string& name, Shape shape, std::vector<T> values);

  Tensor<T>& at(const std::string& name);
  const Tensor<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;

  std::map<std::string, Tensor<T>>& items() { return params_; }
  const std::map<std::string, Tensor<T>>& items() const { return params_; }

  void zero_grad();
  void clear_grad();

  /// Deep copy converted to another precision; gradients are not copied.
  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, t] : params_) {
      out.add(name, t.shape(), std::vector<U>(t.values().begin(), t.values().end()));
    }
    return out;
  }

  /// Overwrites values from another store with identical names and shapes.
  template <typename U>
  void assign_from(const ParamStore<U>& other) {
    for (auto& [name, t] : params_) {
      const Tensor<U>& src = other.at(name);
      if (src.shape() != t.shape()) {
        throw StateError("assign_from: shape mismatch for " + name + ": " +
                         shape_str(src.shape()) + " vs " + shape_str(t.shape()));
      }
      auto dst = t.values_mut();
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = static_cast<T>(src.values()[i]);
      }
    }
    if (other.size() != params_.size()) {
      throw StateError("assign_from: stores hold different parameter sets");
    }
  }

 private:
  std::map<std::string, Tensor<T>> params_;
};

/// Lion first-moment buffers keyed by parameter name.
struct OptimizerState {
  std::map<std::string, std::vector<float>> momentum;
  std::uint64_t step_count = 0;
};

struct LionConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 0.0;
};

/// Zero momentum for every parameter in `params`.
template <typename T>
OptimizerState make_optimizer_state(const ParamStore<T>& params);

/// One Lion update using the gradients currently held by `params`.
///   c = b1 m + (1 - b1) g;  p -= lr (sign(c) + wd p);  m = b2 m + (1 - b2) g
/// sign(0) is 0, so a zero gradient with zero momentum moves a parameter only
/// through weight decay. Parameters that received no gradient use g = 0.
template <typename T>
void lion_step(ParamStore<T>& params, OptimizerState& state, double lr, const LionConfig& cfg);

/// Global L2 norm of all gradients, accumulated in double in name order.
template <typename T>
double global_grad_norm(const ParamStore<T>& params);

/// Scales every gradient by max_norm / norm when norm > max_norm. Returns the
/// norm measured before clipping.
template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm);

/// Shadow copy of the parameters, updated as s <- decay s + (1 - decay) p.
class EmaWeights {
 public:
  EmaWeights() = default;
  EmaWeights(const ParamStore<float>& params, double decay);

  void update(const ParamStore<float>& params);

  double decay() const { return decay_; }
  const std::map<std::string, std::vector<float>>& shadow() const { return shadow_; }
  std::map<std::string, std::vector<float>>& shadow() { return shadow_; }
  bool empty() const { return shadow_.empty(); }

  /// Store with the shadow values in place of the live ones.
  ParamStore<float> materialize(const ParamStore<float>& like) const;

 private:
  double decay_ = 0.9999;
  std::map<std::string, std::vector<float>> shadow_;
};

}  // namespace qecd
