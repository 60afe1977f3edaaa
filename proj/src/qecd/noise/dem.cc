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

#include "qecd/noise/dem.h"

#include <cmath>
#include <map>

#include "qecd/util/errors.h"
#include "qecd/util/parallel.h"
#include "qecd/util/seed.h"

namespace qecd {

DetectorErrorModel extract_dem(const FrameSimulator& sim) {
  struct Candidate {
    ForcedError error;
    double q;
  };
  std::vector<Candidate> candidates;
  for (std::uint32_t s = 0; s < sim.sites().size(); ++s) {
    const NoiseSite& site = sim.sites()[s];
    if (site.prob <= 0.0) continue;
    double q = site.prob;
    if (site.outcomes == 3) {
      q = 0.5 * (1.0 - std::sqrt(std::max(0.0, 1.0 - 4.0 * site.prob / 3.0)));
    } else if (site.outcomes == 15) {
      q = 0.5 * (1.0 - std::pow(std::max(0.0, 1.0 - 16.0 * site.prob / 15.0), 0.125));
    }
    for (std::uint8_t pauli = 1; pauli <= site.outcomes; ++pauli) {
      candidates.push_back({{s, pauli}, q});
    }
  }

  std::map<std::pair<std::vector<std::uint32_t>, bool>, double> merged;
  const std::size_t nd = sim.circuit().detectors.size();
  for (std::size_t begin = 0; begin < candidates.size(); begin += 64) {
    const std::size_t end = std::min(candidates.size(), begin + 64);
    std::vector<std::vector<ForcedError>> lanes;
    for (std::size_t i = begin; i < end; ++i) lanes.push_back({candidates[i].error});
    BlockOutcome o = sim.run_forced(lanes);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t lane = i - begin;
      std::vector<std::uint32_t> dets;
      for (std::size_t k = 0; k < nd; ++k) {
        if ((o.detectors[k] >> lane) & 1u) dets.push_back(static_cast<std::uint32_t>(k));
      }
      const bool obs = (o.observable >> lane) & 1u;
      if (dets.empty() && !obs) continue;
      double& acc = merged[{std::move(dets), obs}];
      const double q = candidates[i].q;
      acc = acc * (1.0 - q) + q * (1.0 - acc);
    }
  }
  DetectorErrorModel dem;
  dem.num_detectors = nd;
  for (auto& [key, q] : merged) dem.mechanisms.push_back({q, key.first, key.second});
  return dem;
}

SyndromeBatch dem_sample(const DetectorErrorModel& dem, std::size_t rows, std::size_t slots,
                         std::size_t shots, std::uint64_t seed, unsigned threads) {
  const std::size_t stride = rows * slots;
  for (const ErrorMechanism& m : dem.mechanisms) {
    if (!(m.probability >= 0.0 && m.probability <= 1.0)) {
      throw ParameterError("dem_sample: mechanism probability " + std::to_string(m.probability) +
                           " outside [0, 1]");
    }
    for (std::uint32_t k : m.detectors) {
      if (k >= stride) {
        throw ParameterError("dem_sample: detector " + std::to_string(k) +
                             " does not exist (have " + std::to_string(stride) + ")");
      }
    }
  }
  SyndromeBatch batch;
  batch.rows = rows;
  batch.slots = slots;
  batch.events.assign(shots * stride, 0);
  batch.labels.assign(shots, 0);
  parallel_for(shots, resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      StreamRng rng(derive_seed(seed, s));
      std::uint8_t* ev = batch.events.data() + s * stride;
      for (const ErrorMechanism& m : dem.mechanisms) {
        if (rng.uniform() >= m.probability) continue;
        for (std::uint32_t k : m.detectors) ev[k] ^= 1u;
        if (m.observable) batch.labels[s] ^= 1u;
      }
    }
  });
  batch.meta.seed = seed;
  batch.meta.shots = shots;
  batch.meta.source = "dem";
  return batch;
}

}  // namespace qecd
