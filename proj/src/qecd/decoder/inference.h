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
#include <vector>

#include "qecd/decoder/decoder_net.h"
#include "qecd/noise/batch.h"

namespace qecd {

/// P_L for every shot of `batch`, computed in chunks of `chunk` shots spread
/// over `threads` workers. Results do not depend on the thread count.
std::vector<float> predict(const DecoderNet<float>& net, const SyndromeBatch& batch,
                           unsigned threads = 0, std::size_t chunk = 256);

/// Fraction of shots whose thresholded prediction (P_L > 0.5) equals the label.
double accuracy(const std::vector<float>& probabilities, const std::vector<std::uint8_t>& labels);

}  // namespace qecd
