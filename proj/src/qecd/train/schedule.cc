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

#include "qecd/train/schedule.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qecd/util/errors.h"

namespace qecd {

double cosine_lr(long iter, double lr_init, double lr_min, double t_max) {
  if (iter < 0) throw ParameterError("cosine_lr: negative iteration");
  if (!(t_max > 0)) throw ParameterError("cosine_lr: t_max must be positive");
  const double t = std::min(static_cast<double>(iter), t_max);
  if (t == t_max) return lr_min;
  return lr_min + (lr_init - lr_min) * (1.0 + std::cos(std::numbers::pi * t / t_max)) / 2.0;
}

std::vector<int> curriculum_cycles(long iter, const CurriculumConfig& cfg) {
  if (iter < 0) throw ParameterError("curriculum_cycles: negative iteration");
  if (cfg.stride <= 0 || cfg.initial <= 0 || cfg.added < 0 || cfg.max_cycles < 1) {
    throw ParameterError("curriculum_cycles: invalid schedule");
  }
  const long stage = iter / cfg.stride;
  const long all = (cfg.max_cycles + 1) / 2;
  const long count = std::min<long>(all, cfg.initial + cfg.added * stage);
  std::vector<int> out;
  for (long i = 0; i < count; ++i) out.push_back(static_cast<int>(2 * i + 1));
  return out;
}

}  // namespace qecd
