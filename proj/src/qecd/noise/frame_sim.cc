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

#include "qecd/noise/frame_sim.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "qecd/util/errors.h"
#include "qecd/util/parallel.h"
#include "qecd/util/seed.h"

namespace qecd {
namespace {

constexpr std::size_t kLanes = 64;

std::uint64_t group_key(NoiseClass cls, double prob) {
  const std::uint64_t c = static_cast<std::uint64_t>(cls) + 1;
  // Decoder noise is keyed on its class alone: schedules that differ only in
  // p_dec then see the same uniforms at every site.
  if (cls == NoiseClass::kDecoder) return mix64(c << 56);
  return mix64((c << 56) ^ mix64(std::bit_cast<std::uint64_t>(prob)));
}

}  // namespace

FrameSimulator::FrameSimulator(const StabilizerCircuit& circuit) : circuit_(circuit) {
  std::map<std::pair<int, double>, std::uint32_t> group_index;
  op_site_begin_.reserve(circuit_.ops.size() + 1);
  for (std::size_t i = 0; i < circuit_.ops.size(); ++i) {
    op_site_begin_.push_back(static_cast<std::uint32_t>(sites_.size()));
    const Op& op = circuit_.ops[i];
    std::uint8_t outcomes = 0;
    std::size_t stride = 1;
    switch (op.kind) {
      case OpKind::kDepolarize1: outcomes = 3; break;
      case OpKind::kDepolarize2: outcomes = 15; stride = 2; break;
      case OpKind::kM:
      case OpKind::kMX:
        if (op.noise == NoiseClass::kMeasurementFlip) outcomes = 1;
        break;
      default: break;
    }
    if (outcomes == 0) continue;
    auto [it, inserted] = group_index.emplace(
        std::make_pair(static_cast<int>(op.noise), op.prob), static_cast<std::uint32_t>(groups_.size()));
    if (inserted) groups_.push_back({op.noise, op.prob, group_key(op.noise, op.prob), {}});
    for (std::size_t k = 0; k < op.targets.size(); k += stride) {
      NoiseSite s;
      s.op = static_cast<std::uint32_t>(i);
      s.offset = static_cast<std::uint32_t>(k);
      s.prob = op.prob;
      s.cls = op.noise;
      s.outcomes = outcomes;
      s.group = it->second;
      groups_[it->second].sites.push_back(static_cast<std::uint32_t>(sites_.size()));
      sites_.push_back(s);
    }
  }
  op_site_begin_.push_back(static_cast<std::uint32_t>(sites_.size()));
}

void FrameSimulator::draw_errors(std::uint64_t seed, std::size_t shot, std::uint32_t lane,
                                 std::vector<Event>& out) const {
  for (const NoiseGroup& g : groups_) {
    StreamRng rng(derive_seed(seed, shot, g.key));
    const std::uint32_t outcomes = sites_[g.sites.front()].outcomes;
    const std::size_t n = g.sites.size();
    if (g.cls == NoiseClass::kDecoder) {
      // Two draws per site whatever the rate, for coupling across schedules.
      for (std::size_t k = 0; k < n; ++k) {
        const double u = rng.uniform();
        const auto pauli = static_cast<std::uint8_t>(1 + rng.below(outcomes));
        if (u < g.prob) out.push_back({g.sites[k], lane, pauli});
      }
      continue;
    }
    if (g.prob <= 0.0) continue;
    if (g.prob >= 1.0) {
      for (std::size_t k = 0; k < n; ++k) {
        out.push_back({g.sites[k], lane, static_cast<std::uint8_t>(1 + rng.below(outcomes))});
      }
      continue;
    }
    const double log_q = std::log1p(-g.prob);
    std::size_t pos = 0;
    while (true) {
      // Number of clean sites before the next error is geometric.
      const double skip = std::floor(std::log1p(-rng.uniform()) / log_q);
      if (skip >= static_cast<double>(n - pos)) break;
      pos += static_cast<std::size_t>(skip);
      out.push_back({g.sites[pos], lane, static_cast<std::uint8_t>(1 + rng.below(outcomes))});
      ++pos;
      if (pos >= n) break;
    }
  }
}

BlockOutcome FrameSimulator::run_block(std::vector<Event>& events, std::uint64_t gauge_seed) const {
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.site != b.site ? a.site < b.site : a.lane < b.lane;
  });
  StreamRng gauge(gauge_seed);
  const std::size_t nq = circuit_.num_qubits;
  std::vector<std::uint64_t> x(nq, 0), z(nq, 0);
  BlockOutcome out;
  out.measurements.assign(circuit_.num_measurements, 0);
  std::size_t m = 0;
  std::size_t ev = 0;
  for (std::size_t i = 0; i < circuit_.ops.size(); ++i) {
    const Op& op = circuit_.ops[i];
    const auto& t = op.targets;
    const std::uint32_t site_end = op_site_begin_[i + 1];
    switch (op.kind) {
      case OpKind::kR:
        for (std::uint32_t q : t) { x[q] = 0; z[q] = gauge(); }
        break;
      case OpKind::kRX:
        for (std::uint32_t q : t) { z[q] = 0; x[q] = gauge(); }
        break;
      case OpKind::kH:
        for (std::uint32_t q : t) std::swap(x[q], z[q]);
        break;
      case OpKind::kCX:
        for (std::size_t k = 0; k + 1 < t.size(); k += 2) {
          x[t[k + 1]] ^= x[t[k]];
          z[t[k]] ^= z[t[k + 1]];
        }
        break;
      case OpKind::kM:
      case OpKind::kMX: {
        const bool zbasis = op.kind == OpKind::kM;
        const std::size_t m0 = m;
        for (std::uint32_t q : t) {
          if (zbasis) {
            out.measurements[m++] = x[q];
            z[q] = gauge();
          } else {
            out.measurements[m++] = z[q];
            x[q] = gauge();
          }
        }
        for (; ev < events.size() && events[ev].site < site_end; ++ev) {
          out.measurements[m0 + sites_[events[ev].site].offset] ^= 1ULL << events[ev].lane;
        }
        break;
      }
      case OpKind::kDepolarize1:
      case OpKind::kDepolarize2:
        for (; ev < events.size() && events[ev].site < site_end; ++ev) {
          const Event& e = events[ev];
          const NoiseSite& s = sites_[e.site];
          const std::uint64_t bit = 1ULL << e.lane;
          const std::uint32_t qa = t[s.offset];
          if (e.pauli & 1) x[qa] ^= bit;
          if (e.pauli & 2) z[qa] ^= bit;
          if (op.kind == OpKind::kDepolarize2) {
            const std::uint32_t qb = t[s.offset + 1];
            if (e.pauli & 4) x[qb] ^= bit;
            if (e.pauli & 8) z[qb] ^= bit;
          }
        }
        break;
    }
  }
  out.detectors.assign(circuit_.detectors.size(), 0);
  for (std::size_t k = 0; k < circuit_.detectors.size(); ++k) {
    std::uint64_t w = 0;
    for (std::uint32_t r : circuit_.detectors[k]) w ^= out.measurements[r];
    out.detectors[k] = w;
  }
  for (std::uint32_t r : circuit_.observable) out.observable ^= out.measurements[r];
  return out;
}

BlockOutcome FrameSimulator::run_forced(const std::vector<std::vector<ForcedError>>& lanes,
                                        std::uint64_t gauge_seed) const {
  if (lanes.size() > kLanes) {
    throw ParameterError("run_forced: at most 64 lanes per block");
  }
  std::vector<Event> events;
  for (std::size_t lane = 0; lane < lanes.size(); ++lane) {
    for (const ForcedError& f : lanes[lane]) {
      if (f.site >= sites_.size()) {
        throw ParameterError("run_forced: site " + std::to_string(f.site) + " does not exist");
      }
      events.push_back({f.site, static_cast<std::uint32_t>(lane), f.pauli});
    }
  }
  return run_block(events, gauge_seed);
}

BlockOutcome FrameSimulator::sample_block(std::uint64_t seed, std::size_t block) const {
  std::vector<Event> events;
  for (std::size_t lane = 0; lane < kLanes; ++lane) {
    draw_errors(seed, block * kLanes + lane, static_cast<std::uint32_t>(lane), events);
  }
  return run_block(events, derive_seed(derive_seed(seed, "gauge"), block));
}

SyndromeBatch FrameSimulator::sample(std::size_t shots, std::uint64_t seed, unsigned threads) const {
  SyndromeBatch batch;
  batch.rows = circuit_.num_rows();
  batch.slots = circuit_.num_slots();
  batch.events.assign(shots * batch.rows * batch.slots, 0);
  batch.labels.assign(shots, 0);
  const std::size_t blocks = (shots + kLanes - 1) / kLanes;
  const std::size_t stride = batch.rows * batch.slots;
  parallel_for(blocks, resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
    std::vector<Event> events;
    for (std::size_t b = begin; b < end; ++b) {
      events.clear();
      const std::size_t first = b * kLanes;
      const std::size_t lanes = std::min(kLanes, shots - first);
      for (std::size_t lane = 0; lane < lanes; ++lane) {
        draw_errors(seed, first + lane, static_cast<std::uint32_t>(lane), events);
      }
      BlockOutcome o = run_block(events, derive_seed(derive_seed(seed, "gauge"), b));
      for (std::size_t lane = 0; lane < lanes; ++lane) {
        std::uint8_t* dst = batch.events.data() + (first + lane) * stride;
        for (std::size_t k = 0; k < stride; ++k) {
          dst[k] = static_cast<std::uint8_t>((o.detectors[k] >> lane) & 1u);
        }
        batch.labels[first + lane] = static_cast<std::uint8_t>((o.observable >> lane) & 1u);
      }
    }
  });
  BatchMeta& meta = batch.meta;
  meta.d = circuit_.layout.d;
  meta.cycles = circuit_.cycles;
  meta.basis = circuit_.basis;
  meta.seed = seed;
  meta.shots = shots;
  meta.injection_rounds = circuit_.injection_rounds;
  for (const Op& op : circuit_.ops) {
    if (op.noise == NoiseClass::kTwoQubit) meta.p = op.prob;
    if (op.noise == NoiseClass::kDecoder) meta.p_dec = op.prob;
  }
  bool any_idle = false;
  for (const Op& op : circuit_.ops) any_idle = any_idle || op.noise == NoiseClass::kIdle;
  meta.idle_noise = any_idle;
  if (circuit_.injection_rounds.size() >= 1) meta.block_cycles = circuit_.injection_rounds.front();
  return batch;
}

SyndromeBatch sample_shots(const StabilizerCircuit& circuit, std::size_t shots,
                           std::uint64_t seed, unsigned threads) {
  return FrameSimulator(circuit).sample(shots, seed, threads);
}

}  // namespace qecd
