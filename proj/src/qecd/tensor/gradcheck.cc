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

#include "qecd/tensor/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace qecd {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error
     << " tolerance=" << tolerance << "\n";
  for (const auto& g : groups) {
    os << "  " << g.name << ": checked=" << g.checked << " max_rel=" << g.max_rel_error
       << " at " << g.worst_index << " (analytic " << g.analytic << ", numeric " << g.numeric
       << ")\n";
  }
  return os.str();
}

GradCheckReport gradient_check(ParamStore<double>& params,
                               const std::function<Tensor<double>()>& loss,
                               const GradCheckOptions& options) {
  const double first = loss().item();
  const double second = loss().item();
  if (std::memcmp(&first, &second, sizeof(double)) != 0) {
    throw ReproducibilityError("gradient_check: forward is not deterministic (" +
                               std::to_string(first) + " vs " + std::to_string(second) + ")");
  }
  if (!std::isfinite(first)) {
    throw NumericError("gradient_check: loss is not finite");
  }

  params.clear_grad();
  {
    Tape<double> tape;
    Tensor<double> root = loss();
    tape.backward(root);
  }

  GradCheckReport report;
  report.tolerance = options.tolerance;
  const double h = options.step;
  for (auto& [name, p] : params.items()) {
    GradGroupReport group;
    group.name = name;
    const std::size_t n = p.numel();
    std::vector<double> analytic(n, 0.0);
    if (p.has_grad()) {
      std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    }
    std::vector<std::size_t> picks;
    if (options.max_elements_per_group == 0 || n <= options.max_elements_per_group) {
      picks.resize(n);
      for (std::size_t i = 0; i < n; ++i) picks[i] = i;
    } else {
      const std::size_t k = options.max_elements_per_group;
      for (std::size_t j = 0; j < k; ++j) picks.push_back(j * n / k);
    }
    auto values = p.values_mut();
    for (std::size_t i : picks) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss().item();
      values[i] = saved - h;
      const double down = loss().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > group.max_rel_error || group.checked == 0) {
        group.max_rel_error = std::max(group.max_rel_error, rel);
        if (rel >= group.max_rel_error) {
          group.worst_index = i;
          group.analytic = a;
          group.numeric = numeric;
        }
      }
      ++group.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
    report.groups.push_back(group);
  }
  params.clear_grad();
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace qecd
