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

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qecd/util/errors.h"

namespace qecd {

// Eigen peels its vector loops according to each operand's address, so the
// same reduction over differently aligned buffers can round differently.
// Every tensor buffer is 64-byte aligned to keep training bit-reproducible.
inline constexpr std::size_t kTensorAlign = 64;

template <typename T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kTensorAlign}));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, std::align_val_t{kTensorAlign}); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Uninitialized aligned scratch array.
template <typename T>
std::shared_ptr<T[]> aligned_scratch(std::size_t n) {
  return std::shared_ptr<T[]>(
      static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kTensorAlign})),
      [](T* p) { ::operator delete(p, std::align_val_t{kTensorAlign}); });
}

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct TensorStorage {
  Shape shape;
  AlignedVector<T> value;
  AlignedVector<T> grad;
  bool requires_grad = false;

  AlignedVector<T>& ensure_grad() {
    if (grad.size() != value.size()) {
      grad.assign(value.size(), T(0));
    }
    return grad;
  }
};

template <typename T>
using StoragePtr = std::shared_ptr<TensorStorage<T>>;

/// Dense row-major tensor handle. Copies share storage; use clone() for a
/// deep copy. Parameters are tensors with requires_grad set; every other
/// tensor is produced by an op and is not mutated afterwards.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : s_(std::make_shared<TensorStorage<T>>()) {
    s_->value.assign(shape_numel(shape), fill);
    s_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::vector<T> values) : s_(std::make_shared<TensorStorage<T>>()) {
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("tensor: shape " + shape_str(shape) + " needs " +
                           std::to_string(shape_numel(shape)) + " values, got " +
                           std::to_string(values.size()));
    }
    s_->shape = std::move(shape);
    s_->value.assign(values.begin(), values.end());
  }

  static Tensor parameter(Shape shape, std::vector<T> values) {
    Tensor t(std::move(shape), std::move(values));
    t.s_->requires_grad = true;
    return t;
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  bool defined() const { return s_ != nullptr; }
  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t numel() const { return s_->value.size(); }

  /// Size of one axis; negative axes count from the end.
  std::size_t dim(int axis) const {
    int r = static_cast<int>(rank());
    int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
      throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                           shape_str(shape()));
    }
    return s_->shape[static_cast<std::size_t>(a)];
  }

  std::span<const T> values() const { return s_->value; }
  std::span<T> values_mut() { return s_->value; }
  T item() const {
    if (numel() != 1) {
      throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    }
    return s_->value[0];
  }
  T operator[](std::size_t i) const { return s_->value[i]; }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool on) { s_->requires_grad = on; }
  bool has_grad() const { return s_->grad.size() == s_->value.size() && !s_->value.empty(); }
  std::span<const T> grad() const { return s_->grad; }
  std::span<T> grad_mut() { return s_->ensure_grad(); }
  void zero_grad() { s_->grad.assign(s_->value.size(), T(0)); }
  void clear_grad() { s_->grad.clear(); }

  Tensor clone() const {
    Tensor t = detach();
    t.s_->requires_grad = s_->requires_grad;
    return t;
  }

  /// Same values, fresh storage, no gradient tracking.
  Tensor detach() const {
    Tensor t;
    t.s_ = std::make_shared<TensorStorage<T>>();
    t.s_->shape = shape();
    t.s_->value = s_->value;
    return t;
  }

  const StoragePtr<T>& storage() const { return s_; }

  bool all_finite() const {
    for (T v : s_->value) {
      if (!std::isfinite(v)) {
        return false;
      }
    }
    return true;
  }

 private:
  StoragePtr<T> s_;
};

/// Reverse-mode tape. Constructing a Tape makes it the recording tape for the
/// current thread until it is destroyed; ops executed without an active tape
/// (inference) record nothing. Nodes are appended as ops run, so the node list
/// is in topological order by construction.
template <typename T>
class Tape {
 public:
  struct Node {
    std::vector<StoragePtr<T>> inputs;
    StoragePtr<T> output;
    std::function<void()> backward;
  };

  Tape() : previous_(current_) { current_ = this; }
  ~Tape() { current_ = previous_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current() { return current_; }

  /// Registers `output` as produced from `inputs`. No-op unless some input
  /// requires a gradient. `backward` reads output->grad and accumulates into
  /// the inputs' grad buffers.
  void record(const Tensor<T>& output, std::vector<Tensor<T>> inputs,
              std::function<void()> backward) {
    bool any = false;
    for (const auto& in : inputs) {
      any = any || in.requires_grad();
    }
    if (!any) {
      return;
    }
    Node node;
    for (auto& in : inputs) {
      node.inputs.push_back(in.storage());
    }
    node.output = output.storage();
    node.output->requires_grad = true;
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
  }

  /// Seeds d(root)/d(root) = 1 and runs every node's backward once, newest
  /// first. Nodes whose output received no gradient are skipped.
  void backward(const Tensor<T>& root) {
    if (root.numel() != 1) {
      throw DimensionError("backward() needs a scalar root, got " + shape_str(root.shape()));
    }
    root.storage()->ensure_grad()[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->output->grad.empty()) {
        continue;
      }
      it->backward();
    }
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  void clear() { nodes_.clear(); }

 private:
  inline static thread_local Tape* current_ = nullptr;
  Tape* previous_;
  std::vector<Node> nodes_;
};

/// Helper for op implementations: records `fn` on the active tape, if any.
template <typename T>
void record_op(const Tensor<T>& output, std::vector<Tensor<T>> inputs, std::function<void()> fn) {
  if (Tape<T>* tape = Tape<T>::current()) {
    tape->record(output, std::move(inputs), std::move(fn));
  }
}

/// Gradient buffer of an op input, or nullptr when it takes no gradient.
template <typename T>
T* grad_target(const StoragePtr<T>& s) {
  return s->requires_grad ? s->ensure_grad().data() : nullptr;
}

}  // namespace qecd
