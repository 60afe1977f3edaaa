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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qecd/code/layout.h"
#include "qecd/decoder/hyperparams.h"
#include "qecd/tensor/checkpoint.h"
#include "qecd/tensor/ops.h"
#include "qecd/tensor/optim.h"

namespace qecd {

/// How a parameter is filled by DecoderNet::initialize.
enum class ParamInit { kNormal, kZero, kOne, kALog, kDtBias };

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamInit init;
  // kNormal scale; 0 means 1/sqrt(fan_in), fan_in = all axes but the last.
  double std = 0.0;

  double normal_std() const;
};

/// Recurrent decoder for a distance-d rotated surface code. Activations are
/// batched over shots: per-cycle tensors have shape [B, l, d_model] with
/// l = d*d - 1 stabilizer slots in row-major grid order.
///
/// All methods are const and record onto the thread's active tape, so one
/// instance can serve several inference threads at once.
template <typename T>
class DecoderNet {
 public:
  /// Recurrent state for streaming a batch of shots one cycle at a time.
  struct Stream {
    Tensor<T> h;
    std::vector<std::uint8_t> measurements;  // running XOR of event rows, [B, l]
    std::size_t batch = 0;
    std::size_t rows = 0;
  };

  DecoderNet(int d, Hyperparams hp);

  /// Fills every parameter from `seed`. Each parameter draws from its own
  /// stream, so values do not depend on declaration order.
  void initialize(std::uint64_t seed);

  int distance() const { return d_; }
  const Hyperparams& hyperparams() const { return hp_; }
  const CodeLayout& layout() const { return layout_; }
  const GridMap& grid() const { return grid_; }
  std::size_t slots() const { return layout_.num_stabilizers(); }
  const std::vector<ParamSpec>& specs() const { return specs_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// Per-slot features from one cycle's event and measurement bits
  /// (each [B, l], row-major by shot). Result [B, l, d_model].
  Tensor<T> embed(std::span<const std::uint8_t> events, std::span<const std::uint8_t> measurements,
                  std::size_t batch) const;

  /// x + MHA(LN x). `weights`, when given, receives the softmax matrix
  /// [B*H, l, l].
  Tensor<T> attention_mixer(const Tensor<T>& x, int layer, std::span<const std::uint8_t> mask = {},
                            Tensor<T>* weights = nullptr) const;
  /// x + Mamba(LN x).
  Tensor<T> mamba_mixer(const Tensor<T>& x, int layer) const;
  /// Dispatches on the configured MixerKind.
  Tensor<T> mixer(const Tensor<T>& x, int layer) const;
  /// x + Wo (silu(LN x Wv) * sigmoid(LN x Wg)).
  Tensor<T> gated_dense(const Tensor<T>& x, int layer) const;
  /// Three dilated residual convolutions on the (d+1) x (d+1) grid.
  Tensor<T> grid_convs(const Tensor<T>& x, int layer) const;
  Tensor<T> syndrome_mixer_layer(const Tensor<T>& x, int layer) const;

  /// h' = skip * u + (sum of the mixer layers' residual branches), u = h + S.
  Tensor<T> rnn_step(const Tensor<T>& h, const Tensor<T>& s) const;

  /// Pre-sigmoid logit per shot, shape [B].
  Tensor<T> readout_logits(const Tensor<T>& h) const;
  Tensor<T> readout(const Tensor<T>& h) const;

  Stream begin(std::size_t batch) const;
  /// Consumes one detection-event row for every shot ([B, l]).
  void advance(Stream& stream, std::span<const std::uint8_t> event_row) const;

  /// Runs the recurrence over `rows` event rows per shot. `events` is
  /// [B, rows, l] as stored in a SyndromeBatch. Returns logits [B].
  Tensor<T> forward_logits(std::span<const std::uint8_t> events, std::size_t batch,
                           std::size_t rows) const;
  Tensor<T> forward(std::span<const std::uint8_t> events, std::size_t batch,
                    std::size_t rows) const;

  template <typename U>
  DecoderNet<U> cast() const {
    DecoderNet<U> out(d_, hp_);
    out.params() = params_.template cast<U>();
    return out;
  }

 private:
  const Tensor<T>& p(const std::string& name) const { return params_.at(name); }
  void declare(std::string name, Shape shape, ParamInit init, double std = 0.0);
  Tensor<T> to_grid(const Tensor<T>& x) const;
  Tensor<T> from_grid(const Tensor<T>& g) const;

  int d_;
  Hyperparams hp_;
  CodeLayout layout_;
  GridMap grid_;
  std::vector<std::size_t> slot_cells_;
  std::vector<ParamSpec> specs_;
  ParamStore<T> params_;
};

/// Parameter records plus {"kind": "decoder", "mixer", "d", "hyperparams"}.
Checkpoint decoder_checkpoint(const DecoderNet<float>& net);

/// Rebuilds a decoder from checkpoint records. Throws CheckpointError when
/// the stored mixer or distance differs from an expected value, or when a
/// parameter is missing or misshapen.
DecoderNet<float> decoder_from_checkpoint(const Checkpoint& ckpt,
                                          std::optional<MixerKind> expect_mixer = std::nullopt,
                                          std::optional<int> expect_d = std::nullopt);

extern template class DecoderNet<float>;
extern template class DecoderNet<double>;

}  // namespace qecd
