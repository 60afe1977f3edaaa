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
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace qecd {

/// F = 2a - 1 with a the fraction of shots where (P_L > 0.5) == label.
double fidelity(const std::vector<float>& probabilities, const std::vector<std::uint8_t>& labels);

struct Interval {
  double low = 0;
  double high = 0;
};

/// Wilson score interval at 95% for a binomial proportion.
Interval error_bars(std::size_t successes, std::size_t shots);

/// One fidelity measurement. shots == 0 marks an exact (noise-free) value.
struct FidelityPoint {
  int cycles = 0;
  double fidelity = 0;
  std::size_t shots = 0;
};

struct LerFit {
  double epsilon = 0;  // clamped to [0, 0.5]
  double f0 = 0;
  double slope = 0;      // log(1 - 2 eps)
  double intercept = 0;  // log F0
  double slope_se = 0;
  double epsilon_se = 0;  // delta method from slope_se
  Interval epsilon_ci;  // 95%
  bool weighted = false;
  std::vector<FidelityPoint> points;  // all inputs, in order
  std::vector<bool> used;             // false where F <= 0
  std::vector<double> residuals;      // log F - fit, NaN where unused
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Least squares on log F = log F0 + n log(1 - 2 eps). Points with F <= 0
/// are dropped with a warning. When every used point carries a shot count
/// the fit is weighted by the binomial variance of log F and the interval
/// uses the normal quantile; otherwise it is ordinary least squares with a
/// Student-t interval from the residuals. Throws FitError with fewer than
/// two usable points.
LerFit fit_ler(const std::vector<FidelityPoint>& points);

/// One point of an LER-vs-p curve. `fidelities` (optional) are the points
/// the LER was fitted from; the bootstrap resamples them. Without them a
/// positive `shots` makes the LER itself the resampled proportion.
struct CurvePoint {
  double p = 0;
  double ler = 0;
  std::size_t shots = 0;
  std::vector<FidelityPoint> fidelities;
};

struct DistanceCurve {
  int d = 0;
  std::vector<CurvePoint> points;  // ascending p
};

struct ThresholdResult {
  bool bracketed = false;
  double p_th = 0;  // NaN when not bracketed
  Interval bracket;  // grid segment that contains the crossing
  double interpolation_bound = 0;  // half the bracket width
  Interval ci;       // bootstrap 95%; NaN when unavailable
  int bootstrap_samples = 0;
  int bootstrap_bracketed = 0;
  std::pair<int, int> distances;
  std::string method = "piecewise log-log linear";
  std::vector<DistanceCurve> curves;

  nlohmann::json to_json() const;
};

/// Crossing of the two smallest distances' LER curves: each curve is linear
/// in (log p, log LER) between grid points, and the crossing is the first p
/// where the larger distance stops being better. No sign change over the
/// shared p range gives bracketed = false, not an exception. Throws
/// ParameterError on fewer than two distances, a series with fewer than two
/// points, or disjoint p ranges.
ThresholdResult find_threshold(std::vector<DistanceCurve> curves, int bootstrap = 1000,
                               std::uint64_t seed = 0);

/// Two-sided 95% critical value of Student's t with `dof` degrees of freedom.
double student_t95(int dof);

}  // namespace qecd
