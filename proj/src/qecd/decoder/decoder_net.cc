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

#include "qecd/decoder/decoder_net.h"

#include <cmath>
#include <random>

#include "qecd/util/errors.h"
#include "qecd/util/seed.h"

namespace qecd {
namespace {

std::string idx(const std::string& prefix, int i) { return prefix + std::to_string(i); }

template <typename T>
void check_finite(const Tensor<T>& t, const std::string& layer) {
  if (!t.all_finite()) {
    throw NumericError("non-finite activations in " + layer);
  }
}

}  // namespace

double ParamSpec::normal_std() const {
  if (std > 0.0) return std;
  std::size_t fan_in = 1;
  for (std::size_t a = 0; a + 1 < shape.size(); ++a) fan_in *= shape[a];
  return 1.0 / std::sqrt(static_cast<double>(fan_in));
}

template <typename T>
DecoderNet<T>::DecoderNet(int d, Hyperparams hp)
    : d_(d), hp_(hp), layout_(build_layout(d)), grid_(grid_embed_map(layout_)) {
  hp_.validate();
  slot_cells_ = grid_.slot_to_cell;
  const std::size_t l = slots();
  const std::size_t dm = hp_.d_model;
  const std::size_t e = hp_.expand();
  const std::size_t n = hp_.d_state;
  const std::size_t r = hp_.dt_rank();
  const std::size_t qkv = static_cast<std::size_t>(hp_.heads * hp_.d_attn);
  const std::size_t wide = static_cast<std::size_t>(hp_.w_gate) * dm;
  const std::size_t dr = hp_.d_read;

  declare("embed/w", {2, dm}, ParamInit::kNormal);
  declare("embed/b", {dm}, ParamInit::kZero);
  // Same scale as the bit embedding it is added to.
  declare("embed/pos", {l, dm}, ParamInit::kNormal, 1.0 / std::sqrt(2.0));
  for (int i = 0; i < hp_.l_stab; ++i) {
    const std::string b = idx("embed/res", i);
    declare(b + "/w1", {dm, dm}, ParamInit::kNormal);
    declare(b + "/b1", {dm}, ParamInit::kZero);
    declare(b + "/w2", {dm, dm}, ParamInit::kZero);
    declare(b + "/b2", {dm}, ParamInit::kZero);
  }
  if (hp_.concat_combine) {
    declare("combine/w", {2 * dm, dm}, ParamInit::kNormal);
    declare("combine/b", {dm}, ParamInit::kZero);
  }
  for (int k = 0; k < hp_.layers_per_step; ++k) {
    const std::string m = idx("mixer", k);
    declare(m + "/ln_g", {dm}, ParamInit::kOne);
    declare(m + "/ln_b", {dm}, ParamInit::kZero);
    if (hp_.mixer == MixerKind::kAttention) {
      for (const char* x : {"q", "k", "v"}) {
        declare(m + "/attn/w" + x, {dm, qkv}, ParamInit::kNormal);
        declare(m + "/attn/b" + x, {qkv}, ParamInit::kZero);
      }
      declare(m + "/attn/wb", {qkv, static_cast<std::size_t>(hp_.d_b)}, ParamInit::kNormal);
      declare(m + "/attn/bb", {static_cast<std::size_t>(hp_.d_b)}, ParamInit::kZero);
      declare(m + "/attn/wo", {static_cast<std::size_t>(hp_.d_b), dm}, ParamInit::kZero);
      declare(m + "/attn/bo", {dm}, ParamInit::kZero);
    } else {
      declare(m + "/mamba/in_w", {dm, e}, ParamInit::kNormal);
      declare(m + "/mamba/in_b", {e}, ParamInit::kZero);
      declare(m + "/mamba/mlp_w1", {e, e}, ParamInit::kNormal);
      declare(m + "/mamba/mlp_b1", {e}, ParamInit::kZero);
      declare(m + "/mamba/mlp_w2", {e, e}, ParamInit::kNormal);
      declare(m + "/mamba/mlp_b2", {e}, ParamInit::kZero);
      if (hp_.causal_conv) {
        declare(m + "/mamba/conv_w", {static_cast<std::size_t>(hp_.d_conv), e}, ParamInit::kNormal);
        declare(m + "/mamba/conv_b", {e}, ParamInit::kZero);
      }
      declare(m + "/mamba/x_w", {e, r + 2 * n}, ParamInit::kNormal);
      declare(m + "/mamba/x_b", {r + 2 * n}, ParamInit::kZero);
      declare(m + "/mamba/dt_w", {r, e}, ParamInit::kNormal);
      declare(m + "/mamba/dt_b", {e}, ParamInit::kDtBias);
      declare(m + "/mamba/a_log", {e, n}, ParamInit::kALog);
      declare(m + "/mamba/d", {e}, ParamInit::kOne);
      declare(m + "/mamba/out_w", {e, dm}, ParamInit::kZero);
      declare(m + "/mamba/out_b", {dm}, ParamInit::kZero);
    }
    declare(m + "/gate/ln_g", {dm}, ParamInit::kOne);
    declare(m + "/gate/ln_b", {dm}, ParamInit::kZero);
    declare(m + "/gate/wv", {dm, wide}, ParamInit::kNormal);
    declare(m + "/gate/bv", {wide}, ParamInit::kZero);
    declare(m + "/gate/wg", {dm, wide}, ParamInit::kNormal);
    declare(m + "/gate/bg", {wide}, ParamInit::kZero);
    declare(m + "/gate/wo", {wide, dm}, ParamInit::kZero);
    declare(m + "/gate/bo", {dm}, ParamInit::kZero);
    for (int j = 0; j < 3; ++j) {
      declare(m + idx("/conv", j) + "/k", {3, 3, dm, dm}, ParamInit::kZero);
      declare(m + idx("/conv", j) + "/b", {dm}, ParamInit::kZero);
    }
  }
  for (int j = 0; j < 2; ++j) {
    declare(idx("readout/conv", j) + "/k", {3, 3, dm, dm}, ParamInit::kNormal);
    declare(idx("readout/conv", j) + "/b", {dm}, ParamInit::kZero);
  }
  declare("readout/in/w", {dm, dr}, ParamInit::kNormal);
  declare("readout/in/b", {dr}, ParamInit::kZero);
  for (int i = 0; i < hp_.l_read; ++i) {
    const std::string b = idx("readout/res", i);
    declare(b + "/w1", {dr, dr}, ParamInit::kNormal);
    declare(b + "/b1", {dr}, ParamInit::kZero);
    declare(b + "/w2", {dr, dr}, ParamInit::kZero);
    declare(b + "/b2", {dr}, ParamInit::kZero);
  }
  declare("readout/out/w", {dr, 1}, ParamInit::kZero);
  declare("readout/out/b", {1}, ParamInit::kZero);
}

template <typename T>
void DecoderNet<T>::declare(std::string name, Shape shape, ParamInit init, double std) {
  params_.add(name, shape, std::vector<T>(shape_numel(shape), T(0)));
  specs_.push_back({std::move(name), std::move(shape), init, std});
}

template <typename T>
void DecoderNet<T>::initialize(std::uint64_t seed) {
  for (const ParamSpec& spec : specs_) {
    StreamRng rng(derive_seed(seed, spec.name));
    auto v = params_.at(spec.name).values_mut();
    switch (spec.init) {
      case ParamInit::kZero:
        std::fill(v.begin(), v.end(), T(0));
        break;
      case ParamInit::kOne:
        std::fill(v.begin(), v.end(), T(1));
        break;
      case ParamInit::kNormal: {
        // Truncated at two standard deviations by resampling.
        const double sd = spec.normal_std();
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& x : v) {
          double z = normal(rng);
          while (std::abs(z) > 2.0) z = normal(rng);
          x = static_cast<T>(sd * z);
        }
        break;
      }
      case ParamInit::kALog: {
        const std::size_t n = spec.shape[1];
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(std::log(double(i % n + 1)));
        break;
      }
      case ParamInit::kDtBias:
        // Step sizes log-uniform in [1e-3, 1e-1], stored through the inverse
        // softplus so that softplus(bias) recovers them.
        for (auto& x : v) {
          const double dt = std::exp(std::log(1e-3) + rng.uniform() * (std::log(1e-1) - std::log(1e-3)));
          x = static_cast<T>(dt + std::log(-std::expm1(-dt)));
        }
        break;
    }
  }
}

template <typename T>
Tensor<T> DecoderNet<T>::embed(std::span<const std::uint8_t> events,
                               std::span<const std::uint8_t> measurements,
                               std::size_t batch) const {
  const std::size_t l = slots();
  if (events.size() != batch * l || measurements.size() != batch * l) {
    throw DimensionError("embed: expected " + std::to_string(batch) + " x " + std::to_string(l) +
                         " bits, got " + std::to_string(events.size()) + " events and " +
                         std::to_string(measurements.size()) + " measurements");
  }
  std::vector<T> in(batch * l * 2);
  for (std::size_t i = 0; i < batch * l; ++i) {
    in[2 * i] = events[i] ? T(1) : T(0);
    in[2 * i + 1] = measurements[i] ? T(1) : T(0);
  }
  Tensor<T> x(Shape{batch, l, 2}, std::move(in));
  Tensor<T> s = add(linear(x, p("embed/w"), p("embed/b")), p("embed/pos"));
  for (int i = 0; i < hp_.l_stab; ++i) {
    const std::string b = idx("embed/res", i);
    s = add(s, linear(silu(linear(s, p(b + "/w1"), p(b + "/b1"))), p(b + "/w2"), p(b + "/b2")));
  }
  check_finite(s, "embed");
  return s;
}

template <typename T>
Tensor<T> DecoderNet<T>::attention_mixer(const Tensor<T>& x, int layer,
                                         std::span<const std::uint8_t> mask,
                                         Tensor<T>* weights) const {
  if (x.rank() != 3 || x.dim(1) == 0) {
    throw DimensionError("attention_mixer: expected [B, l>0, d_model], got " + shape_str(x.shape()));
  }
  const std::string m = idx("mixer", layer);
  const std::size_t b = x.dim(0), l = x.dim(1);
  const std::size_t h = hp_.heads, da = hp_.d_attn;
  Tensor<T> y = layer_norm(x, p(m + "/ln_g"), p(m + "/ln_b"));
  auto heads = [&](const char* which) {
    Tensor<T> t = linear(y, p(m + "/attn/w" + which), p(m + "/attn/b" + which));
    t = permute(reshape(t, {b, l, h, da}), {0, 2, 1, 3});
    return reshape(t, {b * h, l, da});
  };
  Tensor<T> a = scaled_dot_product_attention(heads("q"), heads("k"), heads("v"), mask, weights);
  a = reshape(permute(reshape(a, {b, h, l, da}), {0, 2, 1, 3}), {b, l, h * da});
  a = linear(a, p(m + "/attn/wb"), p(m + "/attn/bb"));
  return add(x, linear(a, p(m + "/attn/wo"), p(m + "/attn/bo")));
}

template <typename T>
Tensor<T> DecoderNet<T>::mamba_mixer(const Tensor<T>& x, int layer) const {
  if (x.rank() != 3 || x.dim(1) == 0) {
    throw DimensionError("mamba_mixer: expected [B, l>0, d_model], got " + shape_str(x.shape()));
  }
  const std::string m = idx("mixer", layer) + "/mamba/";
  const std::size_t r = hp_.dt_rank(), n = hp_.d_state;
  Tensor<T> y = layer_norm(x, p(idx("mixer", layer) + "/ln_g"), p(idx("mixer", layer) + "/ln_b"));
  Tensor<T> xe = linear(y, p(m + "in_w"), p(m + "in_b"));
  // Slot-local MLP path.
  Tensor<T> path_a =
      linear(silu(linear(xe, p(m + "mlp_w1"), p(m + "mlp_b1"))), p(m + "mlp_w2"), p(m + "mlp_b2"));
  // Scan path.
  Tensor<T> xc = hp_.causal_conv ? causal_depthwise_conv1d(xe, p(m + "conv_w"), p(m + "conv_b")) : xe;
  xc = silu(xc);
  Tensor<T> proj = linear(xc, p(m + "x_w"), p(m + "x_b"));
  Tensor<T> dt = softplus(linear(narrow(proj, 0, r), p(m + "dt_w"), p(m + "dt_b")));
  Tensor<T> bmat = narrow(proj, r, n);
  Tensor<T> cmat = narrow(proj, r + n, n);
  Tensor<T> a = scale(exp(p(m + "a_log")), T(-1));
  Tensor<T> path_b = selective_scan(xc, dt, a, bmat, cmat, p(m + "d"));
  return add(x, linear(add(path_a, path_b), p(m + "out_w"), p(m + "out_b")));
}

template <typename T>
Tensor<T> DecoderNet<T>::mixer(const Tensor<T>& x, int layer) const {
  return hp_.mixer == MixerKind::kAttention ? attention_mixer(x, layer) : mamba_mixer(x, layer);
}

template <typename T>
Tensor<T> DecoderNet<T>::gated_dense(const Tensor<T>& x, int layer) const {
  const std::string g = idx("mixer", layer) + "/gate/";
  Tensor<T> y = layer_norm(x, p(g + "ln_g"), p(g + "ln_b"));
  Tensor<T> v = silu(linear(y, p(g + "wv"), p(g + "bv")));
  Tensor<T> gate = sigmoid(linear(y, p(g + "wg"), p(g + "bg")));
  return add(x, linear(mul(v, gate), p(g + "wo"), p(g + "bo")));
}

template <typename T>
Tensor<T> DecoderNet<T>::to_grid(const Tensor<T>& x) const {
  const std::size_t b = x.dim(0), c = x.dim(2), side = grid_.side;
  return reshape(scatter_rows(x, slot_cells_, grid_.num_cells()), {b, side, side, c});
}

template <typename T>
Tensor<T> DecoderNet<T>::from_grid(const Tensor<T>& g) const {
  const std::size_t b = g.dim(0), c = g.dim(3);
  return gather_rows(reshape(g, {b, grid_.num_cells(), c}), slot_cells_);
}

template <typename T>
Tensor<T> DecoderNet<T>::grid_convs(const Tensor<T>& x, int layer) const {
  if (x.rank() != 3 || x.dim(1) != slots()) {
    throw DimensionError("grid_convs: expected [B, " + std::to_string(slots()) + ", C], got " +
                         shape_str(x.shape()));
  }
  Tensor<T> g = to_grid(x);
  for (int j = 0; j < 3; ++j) {
    const std::string c = idx("mixer", layer) + idx("/conv", j);
    g = add(g, silu(conv2d_dilated(g, p(c + "/k"), p(c + "/b"), hp_.dilations[j])));
  }
  return from_grid(g);
}

template <typename T>
Tensor<T> DecoderNet<T>::syndrome_mixer_layer(const Tensor<T>& x, int layer) const {
  Tensor<T> y = grid_convs(gated_dense(mixer(x, layer), layer), layer);
  check_finite(y, idx("syndrome mixer ", layer));
  return y;
}

template <typename T>
Tensor<T> DecoderNet<T>::rnn_step(const Tensor<T>& h, const Tensor<T>& s) const {
  if (h.shape() != s.shape()) {
    throw DimensionError("rnn_step: hidden state " + shape_str(h.shape()) + " vs embedding " +
                         shape_str(s.shape()));
  }
  Tensor<T> u = hp_.concat_combine ? linear(concat_last(h, s), p("combine/w"), p("combine/b"))
                                   : add(h, s);
  // Every mixer layer is residual, so running them from skip * u yields
  // skip * u plus the sum of their branch outputs.
  Tensor<T> x = scale(u, static_cast<T>(hp_.skip_scale));
  for (int k = 0; k < hp_.layers_per_step; ++k) {
    x = syndrome_mixer_layer(x, k);
  }
  return x;
}

template <typename T>
Tensor<T> DecoderNet<T>::readout_logits(const Tensor<T>& h) const {
  const std::size_t b = h.dim(0), dm = h.dim(2);
  Tensor<T> g = to_grid(h);
  for (int j = 0; j < 2; ++j) {
    const std::string c = idx("readout/conv", j);
    g = silu(conv2d_dilated(g, p(c + "/k"), p(c + "/b"), 1));
  }
  Tensor<T> z = mean_axis(reshape(g, {b, grid_.num_cells(), dm}), 1);
  z = linear(z, p("readout/in/w"), p("readout/in/b"));
  for (int i = 0; i < hp_.l_read; ++i) {
    const std::string r = idx("readout/res", i);
    z = add(z, linear(silu(linear(z, p(r + "/w1"), p(r + "/b1"))), p(r + "/w2"), p(r + "/b2")));
  }
  Tensor<T> logits = reshape(linear(silu(z), p("readout/out/w"), p("readout/out/b")), {b});
  check_finite(logits, "readout");
  return logits;
}

template <typename T>
Tensor<T> DecoderNet<T>::readout(const Tensor<T>& h) const {
  return sigmoid(readout_logits(h));
}

template <typename T>
typename DecoderNet<T>::Stream DecoderNet<T>::begin(std::size_t batch) const {
  Stream st;
  st.batch = batch;
  st.h = Tensor<T>(Shape{batch, slots(), static_cast<std::size_t>(hp_.d_model)});
  st.measurements.assign(batch * slots(), 0);
  return st;
}

template <typename T>
void DecoderNet<T>::advance(Stream& stream, std::span<const std::uint8_t> event_row) const {
  if (event_row.size() != stream.measurements.size()) {
    throw DimensionError("advance: event row has " + std::to_string(event_row.size()) +
                         " bits, expected " + std::to_string(stream.measurements.size()));
  }
  for (std::size_t i = 0; i < event_row.size(); ++i) stream.measurements[i] ^= event_row[i] & 1;
  stream.h = rnn_step(stream.h, embed(event_row, stream.measurements, stream.batch));
  ++stream.rows;
}

template <typename T>
Tensor<T> DecoderNet<T>::forward_logits(std::span<const std::uint8_t> events, std::size_t batch,
                                        std::size_t rows) const {
  if (rows == 0) {
    throw DimensionError("forward: at least one event row is required");
  }
  const std::size_t l = slots();
  if (events.size() != batch * rows * l) {
    throw DimensionError("forward: " + std::to_string(events.size()) + " event bits for " +
                         std::to_string(batch) + " shots x " + std::to_string(rows) + " rows x " +
                         std::to_string(l) + " slots");
  }
  Stream st = begin(batch);
  std::vector<std::uint8_t> row(batch * l);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t s = 0; s < batch; ++s) {
      std::copy_n(events.data() + (s * rows + r) * l, l, row.data() + s * l);
    }
    advance(st, row);
  }
  return readout_logits(st.h);
}

template <typename T>
Tensor<T> DecoderNet<T>::forward(std::span<const std::uint8_t> events, std::size_t batch,
                                 std::size_t rows) const {
  return sigmoid(forward_logits(events, batch, rows));
}

template class DecoderNet<float>;
template class DecoderNet<double>;

Checkpoint decoder_checkpoint(const DecoderNet<float>& net) {
  Checkpoint ckpt;
  ckpt.metadata["kind"] = "decoder";
  ckpt.metadata["mixer"] = mixer_name(net.hyperparams().mixer);
  ckpt.metadata["d"] = net.distance();
  ckpt.metadata["hyperparams"] = net.hyperparams().to_json();
  for (const auto& [name, t] : net.params().items()) {
    ckpt.records[name] = {t.shape(), std::vector<float>(t.values().begin(), t.values().end())};
  }
  return ckpt;
}

DecoderNet<float> decoder_from_checkpoint(const Checkpoint& ckpt, std::optional<MixerKind> expect_mixer,
                                          std::optional<int> expect_d) {
  const auto& meta = ckpt.metadata;
  if (!meta.contains("d") || !meta.contains("hyperparams") || !meta.contains("mixer")) {
    throw CheckpointError("checkpoint metadata lacks decoder fields (d, mixer, hyperparams)");
  }
  Hyperparams hp;
  MixerKind kind;
  int d = 0;
  try {
    hp = Hyperparams::from_json(meta.at("hyperparams"));
    kind = parse_mixer(meta.at("mixer").get<std::string>());
    d = meta.at("d").get<int>();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad decoder metadata: ") + e.what());
  }
  if (kind != hp.mixer) {
    throw CheckpointError("checkpoint metadata disagrees with itself about the mixer kind");
  }
  if (expect_mixer && *expect_mixer != kind) {
    throw CheckpointError("checkpoint holds a " + mixer_name(kind) + " decoder, expected " +
                          mixer_name(*expect_mixer));
  }
  if (expect_d && *expect_d != d) {
    throw CheckpointError("checkpoint was trained at d=" + std::to_string(d) + ", expected d=" +
                          std::to_string(*expect_d));
  }
  DecoderNet<float> net(d, hp);
  for (auto& [name, t] : net.params().items()) {
    auto it = ckpt.records.find(name);
    if (it == ckpt.records.end()) {
      throw CheckpointError("checkpoint is missing parameter " + name);
    }
    if (it->second.shape != t.shape()) {
      throw CheckpointError("parameter " + name + " has shape " + shape_str(it->second.shape) +
                            ", expected " + shape_str(t.shape()));
    }
    std::copy(it->second.values.begin(), it->second.values.end(), t.values_mut().begin());
  }
  return net;
}

}  // namespace qecd
