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
#include <string>
#include <vector>

#include "qecd/tensor/optim.h"

namespace qecd {

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-3;
  // Denominator floor of the relative error, so entries whose true gradient
  // is numerically zero are compared absolutely.
  double floor = 1e-6;
  // 0 checks every element; otherwise an evenly spaced subset of this size.
  std::size_t max_elements_per_group = 0;
};

struct GradGroupReport {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradGroupReport> groups;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;

  std::string summary() const;
};

/// Compares the tape gradient of `loss` with respect to every tensor in
/// `params` against central differences. `loss` must build its graph from the
/// tensors in `params` and return a scalar. Runs `loss` twice up front and
/// throws ReproducibilityError if the two values differ in any bit.
GradCheckReport gradient_check(ParamStore<double>& params,
                               const std::function<Tensor<double>()>& loss,
                               const GradCheckOptions& options = {});

}  // namespace qecd
