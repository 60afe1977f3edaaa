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

#include "qecd/eval/protocols.h"

#include <algorithm>
#include <cmath>

#include "qecd/noise/frame_sim.h"
#include "qecd/noise/noise_model.h"
#include "qecd/util/errors.h"
#include "qecd/util/parallel.h"

namespace qecd {
namespace {

EvalResult summarize(std::string mode, const EvalSpec& spec, std::vector<EndpointResult> endpoints) {
  EvalResult r;
  r.mode = std::move(mode);
  r.d = spec.d;
  r.p = spec.p;
  r.endpoints = std::move(endpoints);
  r.total_cycles = r.endpoints.empty() ? 0 : r.endpoints.back().cycles;
  std::vector<FidelityPoint> pts;
  for (const EndpointResult& e : r.endpoints) pts.push_back({e.cycles, e.fidelity, e.shots});
  try {
    r.fit = fit_ler(pts);
  } catch (const FitError& e) {
    r.fit_error = e.what();
  }
  return r;
}

}  // namespace

std::vector<int> realtime_endpoints(int d) {
  const int block = 2 * d + 1;
  return {block, 2 * block, 3 * block, 4 * block};
}

std::vector<SyndromeBatch> sample_endpoints(const EvalSpec& spec, const std::vector<int>& cycles,
                                            double p_dec, int block_cycles) {
  if (cycles.empty() || !std::is_sorted(cycles.begin(), cycles.end()) || cycles.front() < 1) {
    throw ParameterError("sample_endpoints: cycle counts must be positive and ascending");
  }
  if (spec.shots == 0) throw ParameterError("sample_endpoints: shots must be positive");
  const CodeLayout layout = build_layout(spec.d);
  std::vector<SyndromeBatch> out;
  for (int n : cycles) {
    StabilizerCircuit c =
        annotate_si1000(build_memory_circuit(layout, spec.basis, n), NoiseParams{spec.p, spec.idle_noise});
    if (block_cycles > 0) c = inject_decoder_noise(c, p_dec, block_cycles);
    out.push_back(FrameSimulator(c).sample(spec.shots, spec.seed, spec.threads));
  }
  return out;
}

std::vector<EndpointResult> decode_endpoints(const DecoderNet<float>* net,
                                             const std::vector<SyndromeBatch>& batches,
                                             unsigned threads, std::size_t chunk) {
  if (batches.empty()) throw ParameterError("decode_endpoints: no batches");
  const SyndromeBatch& longest = batches.back();
  const std::size_t shots = longest.shots();
  const std::size_t l = longest.slots;
  std::vector<std::size_t> ends;  // event rows before each endpoint's readout row
  for (const SyndromeBatch& b : batches) {
    if (b.shots() != shots || b.slots != l) {
      throw DimensionError("decode_endpoints: batches differ in shots or slots");
    }
    if (!ends.empty() && b.rows - 1 <= ends.back()) {
      throw ParameterError("decode_endpoints: batches must have strictly increasing cycle counts");
    }
    ends.push_back(b.rows - 1);
    for (std::size_t s = 0; s < shots; ++s) {
      if (!std::equal(b.shot_events(s), b.shot_events(s) + (b.rows - 1) * l, longest.shot_events(s))) {
        throw ReproducibilityError("decode_endpoints: " + std::to_string(b.meta.cycles) +
                                   "-cycle batch is not a prefix of the " +
                                   std::to_string(longest.meta.cycles) + "-cycle batch at shot " +
                                   std::to_string(s));
      }
    }
  }
  if (net != nullptr && net->slots() != l) {
    throw DimensionError("decode_endpoints: decoder expects " + std::to_string(net->slots()) +
                         " slots, batches have " + std::to_string(l));
  }
  std::vector<EndpointResult> out(batches.size());
  for (std::size_t k = 0; k < batches.size(); ++k) {
    out[k].cycles = batches[k].meta.cycles;
    out[k].shots = shots;
    out[k].labels = batches[k].labels;
    out[k].predictions.assign(shots, 0.0f);
  }
  if (net != nullptr) {
    if (chunk == 0) chunk = 1;
    const std::size_t chunks = (shots + chunk - 1) / chunk;
    parallel_for(chunks, resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
      std::vector<std::uint8_t> row;
      for (std::size_t c = begin; c < end; ++c) {
        const std::size_t first = c * chunk;
        const std::size_t n = std::min(chunk, shots - first);
        row.resize(n * l);
        auto fill = [&](const SyndromeBatch& b, std::size_t r) {
          for (std::size_t s = 0; s < n; ++s) {
            std::copy_n(b.shot_events(first + s) + r * l, l, row.data() + s * l);
          }
        };
        auto emit = [&](const DecoderNet<float>::Stream& st, std::size_t k) {
          Tensor<float> p = net->readout(st.h);
          std::copy(p.values().begin(), p.values().end(),
                    out[k].predictions.begin() + static_cast<std::ptrdiff_t>(first));
        };
        DecoderNet<float>::Stream st = net->begin(n);
        std::size_t next = 0;
        for (std::size_t r = 0; r < longest.rows; ++r) {
          if (next + 1 < batches.size() && r == ends[next]) {
            DecoderNet<float>::Stream branch = st;
            fill(batches[next], r);
            net->advance(branch, row);
            emit(branch, next);
            ++next;
          }
          fill(longest, r);
          net->advance(st, row);
        }
        emit(st, batches.size() - 1);
      }
    });
  }
  for (EndpointResult& e : out) {
    for (std::size_t s = 0; s < shots; ++s) e.correct += (e.predictions[s] > 0.5f) == (e.labels[s] != 0);
    e.fidelity = 2.0 * static_cast<double>(e.correct) / static_cast<double>(shots) - 1.0;
    e.accuracy_ci = error_bars(e.correct, shots);
  }
  return out;
}

EvalResult memory_eval(const DecoderNet<float>* net, const EvalSpec& spec, const std::vector<int>& cycles) {
  if (net != nullptr && net->distance() != spec.d) {
    throw CheckpointError("decoder trained for d=" + std::to_string(net->distance()) +
                          ", evaluation requested d=" + std::to_string(spec.d));
  }
  std::vector<SyndromeBatch> batches = sample_endpoints(spec, cycles, 0.0, 0);
  return summarize("memory", spec, decode_endpoints(net, batches, spec.threads, spec.chunk));
}

EvalResult realtime_eval(const DecoderNet<float>* net, const EvalSpec& spec, MixerKind schedule,
                         double alpha, std::optional<double> p_dec_override) {
  if (net != nullptr && net->distance() != spec.d) {
    throw CheckpointError("decoder trained for d=" + std::to_string(net->distance()) +
                          ", evaluation requested d=" + std::to_string(spec.d));
  }
  const int block = 2 * spec.d + 1;
  const double p_dec =
      p_dec_override.value_or(decoder_noise_strength(DecoderNoiseSpec::for_mixer(schedule, alpha), spec.d));
  std::vector<SyndromeBatch> batches = sample_endpoints(spec, realtime_endpoints(spec.d), p_dec, block);
  EvalResult r = summarize("realtime", spec, decode_endpoints(net, batches, spec.threads, spec.chunk));
  r.p_dec = p_dec;
  r.block_cycles = block;
  for (int round : batches.back().meta.injection_rounds) r.injections.push_back({round, p_dec});
  return r;
}

nlohmann::json EvalResult::to_json() const {
  nlohmann::json eps = nlohmann::json::array();
  for (const EndpointResult& e : endpoints) {
    eps.push_back({{"cycles", e.cycles},
                   {"shots", e.shots},
                   {"correct", e.correct},
                   {"fidelity", e.fidelity},
                   {"accuracy_ci", {e.accuracy_ci.low, e.accuracy_ci.high}}});
  }
  nlohmann::json inj = nlohmann::json::array();
  for (const InjectionEvent& i : injections) inj.push_back({{"round", i.round}, {"p_dec", i.p_dec}});
  nlohmann::json j = {{"mode", mode},
                      {"d", d},
                      {"p", p},
                      {"p_dec", p_dec},
                      {"block_cycles", block_cycles},
                      {"total_cycles", total_cycles},
                      {"injections", inj},
                      {"endpoints", eps}};
  if (fit) {
    j["fit"] = fit->to_json();
  } else {
    j["fit"] = nullptr;
    j["fit_error"] = fit_error;
  }
  return j;
}

}  // namespace qecd
