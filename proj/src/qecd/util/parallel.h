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
#include <functional>

namespace qecd {

/// Worker count: explicit request if > 0, else $QECD_THREADS, else 1.
unsigned resolve_threads(unsigned requested);

/// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
/// worker. Chunk boundaries depend only on n and `threads`; callers that
/// write disjoint output slices therefore stay deterministic.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace qecd
