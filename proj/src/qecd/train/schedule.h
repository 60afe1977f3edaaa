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

#include <vector>

namespace qecd {

/// lr_min + (lr_init - lr_min) * (1 + cos(pi * min(iter, t_max) / t_max)) / 2.
double cosine_lr(long iter, double lr_init, double lr_min, double t_max);

struct CurriculumConfig {
  long stride = 150000;  // iterations per expansion
  int initial = 5;       // odd cycle counts in the first stage
  int added = 4;         // odd cycle counts added per expansion
  int max_cycles = 25;
};

/// Odd cycle counts available at `iter`: the first initial + added * stage
/// values of {1, 3, ..., max_cycles}, stage = floor(iter / stride).
std::vector<int> curriculum_cycles(long iter, const CurriculumConfig& cfg);

}  // namespace qecd
