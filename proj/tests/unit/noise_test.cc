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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "qecd/noise/batch.h"
#include "qecd/noise/dem.h"
#include "qecd/noise/frame_sim.h"
#include "qecd/noise/noise_model.h"
#include "qecd/util/errors.h"
#include "support/oracles.h"

namespace qecd {
namespace {

using oracle::propagate;

StabilizerCircuit noisy(int d, Basis b, int n, double p, bool idle = true) {
  return annotate_si1000(build_memory_circuit(build_layout(d), b, n), NoiseParams{p, idle});
}

void expect_matches_oracle(const StabilizerCircuit& c) {
  FrameSimulator sim(c);
  std::vector<std::pair<std::uint32_t, std::uint8_t>> cases;
  for (std::uint32_t s = 0; s < sim.sites().size(); ++s)
    for (std::uint8_t p = 1; p <= sim.sites()[s].outcomes; ++p) cases.push_back({s, p});
  std::size_t checked = 0;
  for (std::size_t begin = 0; begin < cases.size(); begin += 64) {
    std::size_t end = std::min(cases.size(), begin + 64);
    std::vector<std::vector<ForcedError>> lanes;
    for (std::size_t i = begin; i < end; ++i) lanes.push_back({{cases[i].first, cases[i].second}});
    BlockOutcome o = sim.run_forced(lanes, 99 + begin);
    for (std::size_t i = begin; i < end; ++i) {
      auto flipped = propagate(c, sim.sites()[cases[i].first], cases[i].second);
      const std::size_t lane = i - begin;
      for (std::size_t k = 0; k < c.detectors.size(); ++k) {
        bool want = false;
        for (auto r : c.detectors[k]) want ^= flipped.count(r) != 0;
        ASSERT_EQ(bool((o.detectors[k] >> lane) & 1), want)
            << "site " << cases[i].first << " pauli " << int(cases[i].second) << " det " << k;
      }
      bool obs = false;
      for (auto r : c.observable) obs ^= flipped.count(r) != 0;
      ASSERT_EQ(bool((o.observable >> lane) & 1), obs);
      ++checked;
    }
  }
  EXPECT_EQ(checked, cases.size());
  EXPECT_GT(checked, 1000u);
}

TEST(Si1000, RatesAndValidation) {
  NoiseParams n{0.002};
  EXPECT_DOUBLE_EQ(n.single_qubit(), 0.0002);
  EXPECT_DOUBLE_EQ(n.measurement(), 0.01);
  EXPECT_DOUBLE_EQ(n.reset(), 0.004);
  EXPECT_DOUBLE_EQ(n.two_qubit(), 0.002);
  EXPECT_THROW((NoiseParams{0.5}.validate()), ParameterError);
  EXPECT_THROW((NoiseParams{-0.1}.validate()), ParameterError);
  StabilizerCircuit c = noisy(3, Basis::kZ, 2, 0.002);
  for (const Op& op : c.ops) {
    if (op.noise == NoiseClass::kSingleQubit || op.noise == NoiseClass::kIdle) {
      EXPECT_DOUBLE_EQ(op.prob, 0.0002);
    }
    if (op.noise == NoiseClass::kMeasurementFlip) {
      EXPECT_DOUBLE_EQ(op.prob, 0.01);
    }
    if (op.noise == NoiseClass::kReset) {
      EXPECT_DOUBLE_EQ(op.prob, 0.004);
    }
  }
  // Idle noise is toggleable.
  for (const Op& op : noisy(3, Basis::kZ, 2, 0.002, false).ops) EXPECT_NE(op.noise, NoiseClass::kIdle);
}

TEST(DecoderNoise, Strength) {
  auto t = DecoderNoiseSpec::for_mixer(MixerKind::kAttention);
  auto m = DecoderNoiseSpec::for_mixer(MixerKind::kMamba);
  EXPECT_NEAR(decoder_noise_strength(t, 9), 0.050015, 1e-6);
  EXPECT_NEAR(decoder_noise_strength(t, 9) / 0.002, 25.0075, 25.0 * 5e-4);
  EXPECT_NEAR(decoder_noise_strength(m, 3), 7.623e-6 * 3 * 3, 1e-12);
  EXPECT_NEAR(decoder_noise_strength(m, 3), 6.861e-5, 5e-9);
  EXPECT_NEAR(decoder_noise_strength(t, 3), 7.623e-6 * 81, 1e-12);
  EXPECT_NEAR(decoder_noise_strength(t, 3), 6.175e-4, 5e-8);
  EXPECT_EQ(decoder_noise_strength(t, 41), 1.0);
}

TEST(DecoderNoise, FourInjectionsOnRealtimeCircuit) {
  for (int d : {3, 5}) {
    const int b = 2 * d + 1;
    auto c = inject_decoder_noise(noisy(d, Basis::kZ, 8 * d + 4, 0.002), 0.01, b);
    EXPECT_EQ(c.cycles, 8 * d + 4);
    EXPECT_EQ(c.injection_rounds, (std::vector<int>{b, 2 * b, 3 * b, 4 * b}));
    std::size_t ops = 0;
    for (const Op& op : c.ops) ops += op.noise == NoiseClass::kDecoder;
    EXPECT_EQ(ops, 4u);
  }
}

TEST(FrameSim, NoiselessCircuitsAreSilent) {
  for (int d : {3, 5})
    for (Basis b : {Basis::kX, Basis::kZ})
      for (int n : {1, 2 * d + 1}) {
        for (const auto& c : {build_memory_circuit(build_layout(d), b, n), noisy(d, b, n, 0.0)}) {
          SyndromeBatch batch = sample_shots(c, 1000, 5);
          for (auto e : batch.events) ASSERT_EQ(e, 0);
          for (auto l : batch.labels) ASSERT_EQ(l, 0);
          EXPECT_EQ(detection_fraction(batch), 0.0);
        }
      }
}

TEST(FrameSim, ExhaustiveSingleErrorsMatchSymbolicOracle) {
  expect_matches_oracle(noisy(3, Basis::kZ, 3, 0.001));
  expect_matches_oracle(noisy(3, Basis::kX, 3, 0.001));
  expect_matches_oracle(inject_decoder_noise(noisy(3, Basis::kZ, 2, 0.001), 0.1, 1));
}

TEST(FrameSim, DataXErrorLightsAdjacentZChecks) {
  const int d = 3, n = 3;
  auto c = inject_decoder_noise(build_memory_circuit(build_layout(d), Basis::kZ, n), 0.5, 1);
  FrameSimulator sim(c);
  const std::size_t l = c.num_slots();
  for (std::uint32_t s = 0; s < sim.sites().size(); ++s) {
    const NoiseSite& site = sim.sites()[s];
    const std::uint32_t q = c.ops[site.op].targets[site.offset];
    const int round = c.ops[site.op].round;
    BlockOutcome o = sim.run_forced({{{s, 1}}});
    std::set<std::size_t> fired, expect;
    for (std::size_t k = 0; k < o.detectors.size(); ++k)
      if (o.detectors[k] & 1) fired.insert(k);
    for (const auto& st : c.layout.stabilizers)
      if (st.kind == Basis::kZ && std::count(st.support.begin(), st.support.end(), q))
        expect.insert(std::size_t(round) * l + st.index);
    EXPECT_EQ(fired, expect) << "qubit " << q << " round " << round;
    if (q == 4) {
      EXPECT_EQ(expect.size(), 2u);
    }
  }
}

TEST(FrameSim, DetectorParityIsLinear) {
  auto c = noisy(3, Basis::kZ, 3, 0.001);
  FrameSimulator sim(c);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    ForcedError a{std::uint32_t(rng() % sim.sites().size()), 0};
    ForcedError b{std::uint32_t(rng() % sim.sites().size()), 0};
    a.pauli = std::uint8_t(1 + rng() % sim.sites()[a.site].outcomes);
    b.pauli = std::uint8_t(1 + rng() % sim.sites()[b.site].outcomes);
    if (a.site == b.site) continue;
    BlockOutcome o = sim.run_forced({{a}, {b}, {a, b}});
    for (auto w : o.detectors) EXPECT_EQ(((w >> 2) & 1), ((w ^ (w >> 1)) & 1));
    EXPECT_EQ(((o.observable >> 2) & 1), ((o.observable ^ (o.observable >> 1)) & 1));
  }
}

TEST(FrameSim, DeterministicAcrossThreadCounts) {
  auto c = noisy(3, Basis::kZ, 7, 0.006);
  auto a = sample_shots(c, 3000, 42, 1);
  auto b = sample_shots(c, 3000, 42, 3);
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(a.labels, b.labels);
  auto e = sample_shots(c, 3000, 43, 1);
  EXPECT_NE(a.events, e.events);
  // A shorter request is a prefix of a longer one.
  auto s = sample_shots(c, 1000, 42, 2);
  EXPECT_TRUE(std::equal(s.events.begin(), s.events.end(), a.events.begin()));
}

TEST(FrameSim, TruncatedExperimentsSharePrefixRows) {
  const int d = 3, b = 7;
  auto base = noisy(d, Basis::kZ, 4 * b, 0.01);
  auto full = sample_shots(inject_decoder_noise(base, 0.05, b), 500, 9);
  for (int k = 1; k <= 3; ++k) {
    auto part = sample_shots(inject_decoder_noise(noisy(d, Basis::kZ, k * b, 0.01), 0.05, b), 500, 9);
    for (std::size_t s = 0; s < 500; ++s)
      for (int r = 0; r < k * b; ++r)
        for (std::size_t j = 0; j < part.slots; ++j)
          ASSERT_EQ(part.event(s, r, j), full.event(s, r, j));
  }
}

TEST(FrameSim, ZeroDecoderNoiseMatchesPlainMemory) {
  auto plain = noisy(3, Basis::kZ, 14, 0.004);
  auto a = sample_shots(plain, 2000, 11);
  auto b = sample_shots(inject_decoder_noise(plain, 0.0, 7), 2000, 11);
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(FrameSim, DecoderScheduleCouplingIsMonotone) {
  auto plain = noisy(5, Basis::kZ, 11, 0.0);
  FrameSimulator lo(inject_decoder_noise(plain, 0.01, 11));
  FrameSimulator hi(inject_decoder_noise(plain, 0.2, 11));
  // With physical noise off, the low schedule's errors are a subset of the
  // high schedule's: every detector flip at the low rate also appears at the
  // high rate whenever that shot's high-rate error set is identical there.
  std::size_t lo_shots = 0, hi_shots = 0;
  for (std::size_t blk = 0; blk < 20; ++blk) {
    auto a = lo.sample_block(1, blk), b = hi.sample_block(1, blk);
    std::uint64_t any_a = 0, any_b = 0;
    for (auto w : a.detectors) any_a |= w;
    for (auto w : b.detectors) any_b |= w;
    EXPECT_EQ(any_a & ~any_b, 0u);
    lo_shots += std::popcount(any_a);
    hi_shots += std::popcount(any_b);
  }
  EXPECT_LT(lo_shots, hi_shots);
}

TEST(FrameSim, FullDecoderNoiseFlipsTwoThirds) {
  // p_dec = 1 right before the final Z readout: each data result flips when
  // the drawn Pauli has an X component (X or Y). Raw data results are random
  // because of the X checks, so compare against the same gauge with p_dec = 0.
  auto plain = build_memory_circuit(build_layout(3), Basis::kZ, 1);
  auto c = inject_decoder_noise(plain, 1.0, 1);
  FrameSimulator sim(c), ref(inject_decoder_noise(plain, 0.0, 1));
  const std::size_t blocks = 100000 / 64 + 1;
  std::vector<double> count(9, 0.0);
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    auto o = sim.sample_block(17, blk);
    auto r = ref.sample_block(17, blk);
    for (std::size_t q = 0; q < 9; ++q) {
      const auto m = c.data_measurement(q);
      count[q] += std::popcount(o.measurements[m] ^ r.measurements[m]);
    }
  }
  const double n = double(blocks * 64);
  const double sigma = std::sqrt(n * (2.0 / 3.0) * (1.0 / 3.0));
  for (double k : count) EXPECT_NEAR(k, n * 2.0 / 3.0, 3 * sigma);
}

TEST(FrameSim, LabelsAreFairCoinsUnderHeavyReadoutNoise) {
  StabilizerCircuit c = build_memory_circuit(build_layout(3), Basis::kZ, 2);
  for (Op& op : c.ops)
    if (op.kind == OpKind::kM) {
      op.prob = 0.5;
      op.noise = NoiseClass::kMeasurementFlip;
    }
  auto batch = sample_shots(c, 100000, 23);
  double ones = 0;
  for (auto l : batch.labels) ones += l;
  EXPECT_NEAR(ones, 50000.0, 3 * std::sqrt(100000 * 0.25));
}

TEST(DetectionFraction, BoundsAndMonotonicity) {
  double prev = 0.0, prev_sigma = 0.0;
  for (double p : {0.002, 0.006, 0.012}) {
    auto batch = sample_shots(noisy(3, Basis::kZ, 7, p), 100000, 31);
    const double f = detection_fraction(batch);
    EXPECT_GT(f, 0.0);
    EXPECT_LT(f, 0.5);
    const double sigma = std::sqrt(f * (1 - f) / double(batch.events.size()));
    EXPECT_GT(f + 3 * sigma, prev - 3 * prev_sigma);
    EXPECT_GT(f, prev);
    prev = f;
    prev_sigma = sigma;
  }
  SyndromeBatch empty;
  EXPECT_THROW(detection_fraction(empty), ParameterError);
}

TEST(Dem, SamplingExamples) {
  DetectorErrorModel dem;
  dem.num_detectors = 4;
  dem.mechanisms = {{1.0, {0, 2}, false}};
  auto b = dem_sample(dem, 2, 2, 50, 1);
  for (std::size_t s = 0; s < 50; ++s) {
    EXPECT_EQ(b.event(s, 0, 0), 1);
    EXPECT_EQ(b.event(s, 0, 1), 0);
    EXPECT_EQ(b.event(s, 1, 0), 1);
    EXPECT_EQ(b.labels[s], 0);
  }
  dem.mechanisms.push_back({1.0, {2, 3}, true});
  b = dem_sample(dem, 2, 2, 50, 1);
  for (std::size_t s = 0; s < 50; ++s) {
    EXPECT_EQ(b.event(s, 1, 0), 0);  // cancelled
    EXPECT_EQ(b.event(s, 1, 1), 1);
    EXPECT_EQ(b.labels[s], 1);
  }
  dem.mechanisms.push_back({0.5, {4}, false});
  EXPECT_THROW(dem_sample(dem, 2, 2, 5, 1), ParameterError);
  dem.mechanisms.back() = {1.5, {0}, false};
  EXPECT_THROW(dem_sample(dem, 2, 2, 5, 1), ParameterError);
}

TEST(Dem, ExtractedModelReproducesDetectionFraction) {
  auto c = noisy(3, Basis::kZ, 3, 0.004);
  FrameSimulator sim(c);
  DetectorErrorModel dem = extract_dem(sim);
  EXPECT_GT(dem.mechanisms.size(), 50u);
  const std::size_t shots = 100000;
  auto direct = sim.sample(shots, 77);
  auto viadem = dem_sample(dem, c.num_rows(), c.num_slots(), shots, 78);
  const double f1 = detection_fraction(direct), f2 = detection_fraction(viadem);
  const double n = double(direct.events.size());
  // Events within a shot are correlated; inflate the binomial sigma by the
  // number of detectors a typical mechanism touches.
  const double sigma = std::sqrt(f1 * (1 - f1) / n + f2 * (1 - f2) / n) * 2.0;
  EXPECT_NEAR(f1, f2, 3 * sigma);
  double l1 = 0, l2 = 0;
  for (auto l : direct.labels) l1 += l;
  for (auto l : viadem.labels) l2 += l;
  EXPECT_NEAR(l1 / shots, l2 / shots, 3 * std::sqrt(2 * (l1 / shots) / shots) + 1e-3);
}

TEST(BatchIo, SynbAndCsvRoundTrip) {
  auto c = inject_decoder_noise(noisy(3, Basis::kX, 5, 0.01), 0.02, 5);
  auto batch = sample_shots(c, 123, 5);
  EXPECT_EQ(batch.meta.d, 3);
  EXPECT_EQ(batch.meta.cycles, 5);
  EXPECT_DOUBLE_EQ(batch.meta.p, 0.01);
  EXPECT_DOUBLE_EQ(batch.meta.p_dec, 0.02);
  EXPECT_EQ(batch.meta.injection_rounds, std::vector<int>{5});
  auto dir = std::filesystem::temp_directory_path();
  auto path = (dir / "qecd_batch_test.synb").string();
  write_synb(path, batch);
  auto back = read_synb(path);
  EXPECT_EQ(back.events, batch.events);
  EXPECT_EQ(back.labels, batch.labels);
  EXPECT_EQ(back.meta.to_json(), batch.meta.to_json());
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 1);
  EXPECT_THROW(read_synb(path), DataError);
  auto csv = (dir / "qecd_batch_test.csv").string();
  write_batch_csv(csv, batch);
  std::ifstream is(csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "shot,label,events");
  std::getline(is, line);
  EXPECT_EQ(line.size(), std::string("0,0,").size() + 6 * 8);
  std::filesystem::remove(path);
  std::filesystem::remove(csv);
}

}  // namespace
}  // namespace qecd
