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

#include "qecd/decoder/inference.h"

#include "qecd/util/errors.h"
#include "qecd/util/parallel.h"

namespace qecd {

std::vector<float> predict(const DecoderNet<float>& net, const SyndromeBatch& batch,
                           unsigned threads, std::size_t chunk) {
  if (batch.slots != net.slots()) {
    throw DimensionError("predict: batch has " + std::to_string(batch.slots) +
                         " slots per row, decoder expects " + std::to_string(net.slots()));
  }
  if (chunk == 0) chunk = 1;
  std::vector<float> out(batch.shots());
  const std::size_t chunks = (batch.shots() + chunk - 1) / chunk;
  const std::size_t stride = batch.shot_stride();
  parallel_for(chunks, resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const std::size_t first = c * chunk;
      const std::size_t n = std::min(chunk, batch.shots() - first);
      std::span<const std::uint8_t> ev(batch.events.data() + first * stride, n * stride);
      Tensor<float> p = net.forward(ev, n, batch.rows);
      std::copy(p.values().begin(), p.values().end(), out.begin() + static_cast<std::ptrdiff_t>(first));
    }
  });
  return out;
}

double accuracy(const std::vector<float>& probabilities, const std::vector<std::uint8_t>& labels) {
  if (probabilities.size() != labels.size() || labels.empty()) {
    throw DimensionError("accuracy: " + std::to_string(probabilities.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    hits += (probabilities[i] > 0.5f) == (labels[i] != 0);
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace qecd
