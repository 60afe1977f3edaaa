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

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>

#include "qecd/decoder/decoder_net.h"
#include "qecd/tensor/gradcheck.h"
#include "qecd/util/errors.h"

namespace qecd {
namespace {

Hyperparams tiny(MixerKind kind, int d_model = 16) {
  Hyperparams hp = Hyperparams::for_distance(3, kind);
  hp.d_model = d_model;
  hp.heads = 2;
  hp.d_attn = 8;
  hp.d_b = 12;
  hp.d_state = 4;
  hp.d_read = 12;
  hp.l_read = 2;
  hp.w_gate = 2;
  return hp;
}

// Replaces every parameter with random values so that no branch is silenced
// by zero initialization. Keeps the state matrix and norm gains in range.
template <typename T>
void randomize(DecoderNet<T>& net, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& [name, t] : net.params().items()) {
    for (auto& v : t.values_mut()) {
      if (name.find("a_log") != std::string::npos) {
        v = static_cast<T>(std::log(1.0 + std::abs(n(rng))));
      } else if (name.find("ln_g") != std::string::npos) {
        v = static_cast<T>(1.0 + 0.2 * n(rng));
      } else {
        v = static_cast<T>(scale * n(rng));
      }
    }
  }
}

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed, double p = 0.3) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(p);
  std::vector<std::uint8_t> v(n);
  for (auto& x : v) x = b(rng);
  return v;
}

Tensor<double> random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = n(rng);
  return Tensor<double>(shape, v);
}

// Weighted sum with fixed random coefficients, so the check sees every output.
Tensor<double> probe(const Tensor<double>& y, std::uint64_t seed) {
  return sum_all(mul(y, random_tensor(y.shape(), seed)));
}

GradCheckOptions sampled(std::size_t per_group = 12) {
  GradCheckOptions o;
  o.max_elements_per_group = per_group;
  return o;
}

TEST(Hyperparams, DefaultsAndDilations) {
  Hyperparams hp;
  EXPECT_EQ(hp.d_model, 256);
  EXPECT_EQ(hp.heads, 4);
  EXPECT_EQ(hp.d_b, 48);
  EXPECT_EQ(hp.d_attn, 32);
  EXPECT_EQ(hp.d_state, 16);
  EXPECT_EQ(hp.d_conv, 4);
  EXPECT_EQ(hp.w_mamba, 1);
  EXPECT_EQ(hp.l_stab, 2);
  EXPECT_EQ(hp.d_read, 48);
  EXPECT_EQ(hp.w_gate, 5);
  EXPECT_EQ(hp.layers_per_step, 3);
  EXPECT_EQ(default_dilations(3), (std::array<int, 3>{1, 1, 1}));
  EXPECT_EQ(default_dilations(5), (std::array<int, 3>{1, 1, 2}));
  EXPECT_EQ(default_dilations(7), (std::array<int, 3>{1, 2, 4}));
  EXPECT_EQ(hp.dt_rank(), 16);
  auto back = Hyperparams::from_json(tiny(MixerKind::kAttention).to_json());
  EXPECT_EQ(back.to_json(), tiny(MixerKind::kAttention).to_json());
  hp.d_model = 0;
  hp.dilations[1] = 0;
  try {
    hp.validate();
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("d_model=0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("dilation=0"), std::string::npos);
  }
}

TEST(DecoderNet, InitializationIsSeededAndZeroesResidualOutputs) {
  DecoderNet<float> a(3, tiny(MixerKind::kMamba)), b(3, tiny(MixerKind::kMamba));
  a.initialize(5);
  b.initialize(5);
  for (const auto& [name, t] : a.params().items()) {
    auto u = b.params().at(name).values();
    EXPECT_TRUE(std::equal(t.values().begin(), t.values().end(), u.begin())) << name;
  }
  for (const auto& [name, t] : a.params().items()) {
    if (name.ends_with("out_w") || name.ends_with("/wo") || name.ends_with("/w2")) {
      for (float v : t.values()) ASSERT_EQ(v, 0.0f) << name;
    }
  }
  // Truncated normals stay within two of their standard deviations.
  for (const ParamSpec& s : a.specs()) {
    if (s.init != ParamInit::kNormal) continue;
    for (float v : a.params().at(s.name).values()) ASSERT_LE(std::abs(v), 2 * s.normal_std()) << s.name;
  }
  EXPECT_DOUBLE_EQ(a.specs().front().normal_std(), 1 / std::sqrt(2.0));
  // Step sizes land in [1e-3, 1e-1] after the softplus.
  for (float v : a.params().at("mixer0/mamba/dt_b").values()) {
    const double dt = std::log1p(std::exp(double(v)));
    EXPECT_GE(dt, 0.999e-3);
    EXPECT_LE(dt, 1.001e-1);
  }
}

TEST(DecoderNet, EmbedIsSlotLocalAndPure) {
  DecoderNet<double> net(3, tiny(MixerKind::kMamba));
  randomize(net, 1);
  const std::size_t l = net.slots(), batch = 3;
  auto ev = random_bits(batch * l, 2), ms = random_bits(batch * l, 3);
  Tensor<double> s0 = net.embed(ev, ms, batch);
  EXPECT_EQ(s0.shape(), (Shape{batch, l, 16}));
  // Same bits at the same slot give the same features in every shot.
  std::vector<std::uint8_t> zeros(batch * l, 0);
  Tensor<double> z = net.embed(zeros, zeros, batch);
  for (std::size_t i = 0; i < l * 16; ++i) {
    EXPECT_EQ(z[i], z[l * 16 + i]);
    EXPECT_EQ(z[i], z[2 * l * 16 + i]);
  }
  // Flipping one event bit moves only that slot.
  auto ev2 = ev;
  ev2[l + 4] ^= 1;
  Tensor<double> s1 = net.embed(ev2, ms, batch);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t j = 0; j < l; ++j) {
      double diff = 0;
      for (std::size_t c = 0; c < 16; ++c) diff += std::abs(s0[(s * l + j) * 16 + c] - s1[(s * l + j) * 16 + c]);
      if (s == 1 && j == 4) {
        EXPECT_GT(diff, 1e-6);
      } else {
        EXPECT_EQ(diff, 0.0);
      }
    }
  EXPECT_THROW(net.embed(std::vector<std::uint8_t>(5), ms, batch), DimensionError);
  auto report = gradient_check(net.params(), [&] { return probe(net.embed(ev, ms, batch), 4); }, sampled(40));
  EXPECT_TRUE(report.passed) << report.summary();
}

TEST(AttentionMixer, SingleSlotReturnsValuePath) {
  DecoderNet<double> net(3, tiny(MixerKind::kAttention));
  randomize(net, 2);
  Tensor<double> x = random_tensor({1, 1, 16}, 3);
  Tensor<double> y = net.attention_mixer(x, 0);
  const auto& P = net.params();
  // Hand evaluation: LN, value projection, block projection, output projection.
  std::vector<double> ln(16);
  double mu = 0, var = 0;
  for (int c = 0; c < 16; ++c) mu += x[c] / 16;
  for (int c = 0; c < 16; ++c) var += (x[c] - mu) * (x[c] - mu) / 16;
  for (int c = 0; c < 16; ++c)
    ln[c] = (x[c] - mu) / std::sqrt(var + 1e-5) * P.at("mixer0/ln_g")[c] + P.at("mixer0/ln_b")[c];
  auto lin = [&](const std::vector<double>& in, const std::string& w, const std::string& b) {
    const auto& W = P.at(w);
    std::vector<double> out(W.dim(1));
    for (std::size_t o = 0; o < out.size(); ++o) {
      out[o] = P.at(b)[o];
      for (std::size_t i = 0; i < in.size(); ++i) out[o] += in[i] * W[i * out.size() + o];
    }
    return out;
  };
  auto v = lin(lin(lin(ln, "mixer0/attn/wv", "mixer0/attn/bv"), "mixer0/attn/wb", "mixer0/attn/bb"),
               "mixer0/attn/wo", "mixer0/attn/bo");
  for (int c = 0; c < 16; ++c) EXPECT_NEAR(y[c], x[c] + v[c], 1e-12);
  EXPECT_THROW(net.attention_mixer(Tensor<double>(Shape{1, 0, 16}), 0), DimensionError);
}

TEST(AttentionMixer, PermutationEquivariantAndRowsNormalized) {
  DecoderNet<double> net(3, tiny(MixerKind::kAttention));
  randomize(net, 3);
  const std::size_t l = 8;
  Tensor<double> x = random_tensor({2, l, 16}, 4);
  Tensor<double> w;
  Tensor<double> y = net.attention_mixer(x, 1, {}, &w);
  EXPECT_EQ(w.shape(), (Shape{4, l, l}));
  for (std::size_t r = 0; r < 4 * l; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < l; ++c) s += w[r * l + c];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  std::vector<std::size_t> perm(l);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937(5));
  Tensor<double> xp = gather_rows(x, perm);
  Tensor<double> yp = net.attention_mixer(xp, 1);
  Tensor<double> expect = gather_rows(y, perm);
  for (std::size_t i = 0; i < yp.numel(); ++i) EXPECT_NEAR(yp[i], expect[i], 1e-12);
}

TEST(MambaMixer, SingleSlotClosedForm) {
  Hyperparams hp = tiny(MixerKind::kMamba, 4);
  hp.d_state = 1;
  DecoderNet<double> net(3, hp);
  randomize(net, 6);
  Tensor<double> x = random_tensor({1, 1, 4}, 7);
  Tensor<double> y = net.mamba_mixer(x, 2);
  const auto& P = net.params();
  const std::string m = "mixer2/mamba/";
  auto at = [&](const std::string& n, std::size_t i) { return P.at(n)[i]; };
  auto silu = [](double v) { return v / (1 + std::exp(-v)); };
  auto softplus = [](double v) { return std::log1p(std::exp(v)); };
  const std::size_t dm = 4, e = 4, r = 1;  // dt_rank(4) = 1
  double mu = 0, var = 0;
  for (std::size_t c = 0; c < dm; ++c) mu += x[c] / dm;
  for (std::size_t c = 0; c < dm; ++c) var += (x[c] - mu) * (x[c] - mu) / dm;
  std::vector<double> ln(dm), xe(e), h1(e), pa(e), xc(e);
  for (std::size_t c = 0; c < dm; ++c)
    ln[c] = (x[c] - mu) / std::sqrt(var + 1e-5) * at("mixer2/ln_g", c) + at("mixer2/ln_b", c);
  for (std::size_t o = 0; o < e; ++o) {
    xe[o] = at(m + "in_b", o);
    for (std::size_t i = 0; i < dm; ++i) xe[o] += ln[i] * at(m + "in_w", i * e + o);
  }
  for (std::size_t o = 0; o < e; ++o) {
    h1[o] = at(m + "mlp_b1", o);
    for (std::size_t i = 0; i < e; ++i) h1[o] += xe[i] * at(m + "mlp_w1", i * e + o);
    h1[o] = silu(h1[o]);
  }
  for (std::size_t o = 0; o < e; ++o) {
    pa[o] = at(m + "mlp_b2", o);
    for (std::size_t i = 0; i < e; ++i) pa[o] += h1[i] * at(m + "mlp_w2", i * e + o);
  }
  // Only the last causal tap sees the single slot.
  const std::size_t k = hp.d_conv;
  for (std::size_t c = 0; c < e; ++c) xc[c] = silu(at(m + "conv_w", (k - 1) * e + c) * xe[c] + at(m + "conv_b", c));
  double proj[3];
  for (std::size_t o = 0; o < 3; ++o) {
    proj[o] = at(m + "x_b", o);
    for (std::size_t i = 0; i < e; ++i) proj[o] += xc[i] * at(m + "x_w", i * 3 + o);
  }
  const double bcoef = proj[r], ccoef = proj[r + 1];
  std::vector<double> mixed(e);
  for (std::size_t c = 0; c < e; ++c) {
    const double delta = softplus(proj[0] * at(m + "dt_w", c) + at(m + "dt_b", c));
    const double state = delta * bcoef * xc[c];  // h_0 = 0, so A drops out
    mixed[c] = pa[c] + ccoef * state + at(m + "d", c) * xc[c];
  }
  for (std::size_t o = 0; o < dm; ++o) {
    double out = at(m + "out_b", o);
    for (std::size_t i = 0; i < e; ++i) out += mixed[i] * at(m + "out_w", i * dm + o);
    EXPECT_NEAR(y[o], x[o] + out, 1e-12);
  }
}

TEST(MambaMixer, CausalAlongSlots) {
  DecoderNet<double> net(3, tiny(MixerKind::kMamba));
  randomize(net, 8);
  Tensor<double> x = random_tensor({1, 8, 16}, 9);
  Tensor<double> y = net.mamba_mixer(x, 0);
  auto v = x.clone();
  v.values_mut()[5 * 16 + 3] += 1.0;
  Tensor<double> y2 = net.mamba_mixer(v, 0);
  for (std::size_t j = 0; j < 8; ++j) {
    double diff = 0;
    for (std::size_t c = 0; c < 16; ++c) diff += std::abs(y[j * 16 + c] - y2[j * 16 + c]);
    if (j < 5) {
      EXPECT_EQ(diff, 0.0) << j;
    } else {
      EXPECT_GT(diff, 0.0) << j;
    }
  }
}

TEST(SyndromeMixer, IdentityAtInitialization) {
  for (MixerKind kind : {MixerKind::kAttention, MixerKind::kMamba}) {
    DecoderNet<double> net(5, tiny(kind));
    net.initialize(3);
    Tensor<double> x = random_tensor({2, net.slots(), 16}, 10);
    Tensor<double> y = net.syndrome_mixer_layer(x, 0);
    for (std::size_t i = 0; i < x.numel(); ++i) ASSERT_EQ(y[i], x[i]);
    Tensor<double> zero(Shape{2, net.slots(), 16});
    Tensor<double> yz = net.syndrome_mixer_layer(zero, 1);
    for (double v : yz.values()) ASSERT_EQ(v, 0.0);
  }
}

TEST(SyndromeMixer, PaddingCellsNeverLeak) {
  DecoderNet<double> net(5, tiny(MixerKind::kMamba));
  const GridMap& g = net.grid();
  Tensor<double> x = random_tensor({2, net.slots(), 3}, 11);
  Tensor<double> grid = scatter_rows(x, g.slot_to_cell, g.num_cells());
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t cell = 0; cell < g.num_cells(); ++cell)
      if (g.cell_to_slot[cell] < 0) {
        for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(grid[(b * g.num_cells() + cell) * 3 + c], 0.0);
      }
  // Garbage in padding cells is invisible after gathering.
  Tensor<double> dirty = grid.clone();
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t cell = 0; cell < g.num_cells(); ++cell)
      if (g.cell_to_slot[cell] < 0) {
        for (std::size_t c = 0; c < 3; ++c) dirty.values_mut()[(b * g.num_cells() + cell) * 3 + c] = 1e9;
      }
  Tensor<double> back = gather_rows(dirty, g.slot_to_cell);
  for (std::size_t i = 0; i < x.numel(); ++i) ASSERT_EQ(back[i], x[i]);
}

TEST(SyndromeMixer, GradientCheckBothKinds) {
  for (MixerKind kind : {MixerKind::kAttention, MixerKind::kMamba}) {
    DecoderNet<double> net(5, tiny(kind, 8));
    randomize(net, 12);
    // The input joins the store so its gradient is checked as well.
    auto v = random_tensor({2, net.slots(), 8}, 13).values();
    Tensor<double>& x = net.params().add("input", {2, net.slots(), 8}, {v.begin(), v.end()});
    auto report = gradient_check(net.params(), [&] { return probe(net.syndrome_mixer_layer(x, 2), 14); },
                                 sampled());
    EXPECT_TRUE(report.passed) << mixer_name(kind) << "\n" << report.summary();
  }
}

TEST(RnnStep, SkipPathAndGradients) {
  DecoderNet<double> net(3, tiny(MixerKind::kMamba));
  net.initialize(4);  // every mixer branch ends in a zero projection
  Tensor<double> h = random_tensor({2, net.slots(), 16}, 14);
  Tensor<double> s = random_tensor({2, net.slots(), 16}, 15);
  Tensor<double> out = net.rnn_step(h, s);
  for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_NEAR(out[i], 0.7071 * (h[i] + s[i]), 1e-15);
  randomize(net, 16);
  auto report = gradient_check(net.params(), [&] { return probe(net.rnn_step(h, s), 17); }, sampled());
  EXPECT_TRUE(report.passed) << report.summary();
  EXPECT_THROW(net.rnn_step(h, random_tensor({2, net.slots(), 8}, 1)), DimensionError);
}

TEST(Readout, RangeAndZeroInit) {
  DecoderNet<double> net(3, tiny(MixerKind::kAttention));
  net.initialize(5);
  Tensor<double> h = random_tensor({4, net.slots(), 16}, 18);
  Tensor<double> flat = net.readout(h);
  for (double v : flat.values()) EXPECT_EQ(v, 0.5);
  randomize(net, 19);
  Tensor<double> moderate = net.readout(h);
  for (double v : moderate.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  // Huge logits saturate to the closed interval but never leave it.
  randomize(net, 19, 2.0);
  Tensor<double> extreme = net.readout(scale(h, 100.0));
  for (double v : extreme.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  randomize(net, 20);
  auto report = gradient_check(net.params(), [&] { return probe(net.readout_logits(h), 21); }, sampled());
  EXPECT_TRUE(report.passed) << report.summary();
}

TEST(Forward, PurityStreamingAndErrors) {
  DecoderNet<double> net(3, tiny(MixerKind::kMamba));
  randomize(net, 22);
  const std::size_t l = net.slots(), rows = 4;
  auto one = random_bits(rows * l, 23);
  std::vector<std::uint8_t> two(one);
  two.insert(two.end(), one.begin(), one.end());
  Tensor<double> p = net.forward(two, 2, rows);
  EXPECT_EQ(p[0], p[1]);
  EXPECT_THROW(net.forward({}, 2, 0), DimensionError);
  EXPECT_THROW(net.forward(two, 2, 3), DimensionError);
  // Streaming a row at a time matches the batched call.
  auto st = net.begin(1);
  for (std::size_t r = 0; r < rows; ++r) net.advance(st, std::span(one).subspan(r * l, l));
  EXPECT_EQ(net.readout(st.h)[0], p[0]);
  // A NaN weight is reported with the layer that produced it.
  net.params().at("mixer1/gate/wv").values_mut()[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    net.forward(two, 2, rows);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("syndrome mixer 1"), std::string::npos) << e.what();
  }
}

TEST(Forward, EndToEndGradientCheckBothKinds) {
  for (MixerKind kind : {MixerKind::kAttention, MixerKind::kMamba}) {
    Hyperparams hp = Hyperparams::for_distance(3, kind);
    hp.d_model = 16;
    DecoderNet<double> net(3, hp);
    randomize(net, 24, 0.05);
    const std::size_t rows = 3, batch = 2;  // n = 2 cycles
    auto ev = random_bits(batch * rows * net.slots(), 25);
    std::vector<double> labels{1.0, 0.0};
    auto report = gradient_check(
        net.params(), [&] { return bce_with_logits(net.forward_logits(ev, batch, rows), std::span<const double>(labels)); },
        sampled(6));
    EXPECT_TRUE(report.passed) << mixer_name(kind) << "\n" << report.summary();
  }
}

TEST(Forward, CostIsLinearInCycles) {
  DecoderNet<float> net(3, tiny(MixerKind::kMamba, 32));
  net.initialize(1);
  const std::size_t l = net.slots(), batch = 16;
  auto time = [&](std::size_t rows) {
    auto ev = random_bits(batch * rows * l, rows);
    std::vector<double> t;
    for (int rep = 0; rep < 7; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      net.forward(ev, batch, rows);
      t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(t.begin(), t.end());
    return t[3];
  };
  time(4);
  const double ratio = time(40) / time(20);
  EXPECT_GT(ratio, 2.0 * 0.75);
  EXPECT_LT(ratio, 2.0 * 1.25);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  DecoderNet<float> net(3, tiny(MixerKind::kAttention));
  net.initialize(7);
  randomize(net, 26);
  auto path = (std::filesystem::temp_directory_path() / "qecd_decoder_test.ckpt").string();
  save_checkpoint(path, decoder_checkpoint(net));
  Checkpoint ck = load_checkpoint(path);
  DecoderNet<float> back = decoder_from_checkpoint(ck, MixerKind::kAttention, 3);
  auto ev = random_bits(3 * 4 * net.slots(), 27);
  Tensor<float> a = net.forward(ev, 3, 4), b = back.forward(ev, 3, 4);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_THROW(decoder_from_checkpoint(ck, MixerKind::kMamba), CheckpointError);
  EXPECT_THROW(decoder_from_checkpoint(ck, std::nullopt, 5), CheckpointError);
  ck.records.erase("readout/out/b");
  EXPECT_THROW(decoder_from_checkpoint(ck), CheckpointError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace qecd
