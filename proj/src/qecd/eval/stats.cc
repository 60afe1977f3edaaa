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

#include "qecd/eval/stats.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qecd/util/errors.h"
#include "qecd/util/seed.h"

namespace qecd {
namespace {

constexpr double kZ95 = 1.959963984540054;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double clamp_epsilon(double slope) { return std::clamp((1.0 - std::exp(slope)) / 2.0, 0.0, 0.5); }

double loglog_at(const DistanceCurve& c, double p) {
  const auto& pts = c.points;
  std::size_t i = 1;
  while (i + 1 < pts.size() && pts[i].p < p) ++i;
  const double x0 = std::log(pts[i - 1].p), x1 = std::log(pts[i].p);
  const double y0 = std::log(pts[i - 1].ler), y1 = std::log(pts[i].ler);
  if (x1 == x0) return y0;
  return y0 + (std::log(p) - x0) * (y1 - y0) / (x1 - x0);
}

struct Crossing {
  bool found = false;
  double p = kNaN;
  Interval bracket{kNaN, kNaN};
};

// First sign change of log LER_b - log LER_a over the merged grid.
Crossing crossing(const DistanceCurve& a, const DistanceCurve& b) {
  const double lo = std::max(a.points.front().p, b.points.front().p);
  const double hi = std::min(a.points.back().p, b.points.back().p);
  std::vector<double> grid;
  for (const auto* c : {&a, &b}) {
    for (const CurvePoint& pt : c->points) {
      if (pt.p >= lo && pt.p <= hi) grid.push_back(pt.p);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<double> g(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) g[i] = loglog_at(b, grid[i]) - loglog_at(a, grid[i]);
  Crossing out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (g[i] == 0.0) {
      out = {true, grid[i], {grid[i], grid[i]}};
      return out;
    }
    if (i + 1 < grid.size() && (g[i] < 0) != (g[i + 1] < 0) && g[i + 1] != 0.0) {
      const double t = g[i] / (g[i] - g[i + 1]);
      const double lp = std::log(grid[i]) + t * (std::log(grid[i + 1]) - std::log(grid[i]));
      out = {true, std::exp(lp), {grid[i], grid[i + 1]}};
      return out;
    }
  }
  return out;
}

nlohmann::json interval_json(const Interval& i) { return nlohmann::json::array({i.low, i.high}); }

nlohmann::json points_json(const std::vector<FidelityPoint>& pts) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : pts) a.push_back({{"cycles", p.cycles}, {"fidelity", p.fidelity}, {"shots", p.shots}});
  return a;
}

}  // namespace

double fidelity(const std::vector<float>& probabilities, const std::vector<std::uint8_t>& labels) {
  if (probabilities.size() != labels.size()) {
    throw DimensionError("fidelity: " + std::to_string(probabilities.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ParameterError("fidelity: no shots");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += (probabilities[i] > 0.5f) == (labels[i] != 0);
  return 2.0 * static_cast<double>(correct) / static_cast<double>(labels.size()) - 1.0;
}

Interval error_bars(std::size_t successes, std::size_t shots) {
  if (shots == 0) throw ParameterError("error_bars: shots must be positive");
  if (successes > shots) {
    throw ParameterError("error_bars: " + std::to_string(successes) + " successes out of " +
                         std::to_string(shots) + " shots");
  }
  const double n = static_cast<double>(shots);
  const double k = static_cast<double>(successes);
  const double z2 = kZ95 * kZ95;
  const double center = (k + z2 / 2) / (n + z2);
  const double half = kZ95 / (n + z2) * std::sqrt(k * (n - k) / n + z2 / 4);
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double student_t95(int dof) {
  static constexpr double kTable[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                      2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                      2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                      2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof < 1) throw ParameterError("student_t95: dof must be positive");
  if (dof <= 30) return kTable[dof - 1];
  // Cornish-Fisher expansion around the normal quantile.
  const double z = kZ95, v = dof;
  return z + (z * z * z + z) / (4 * v) + (5 * std::pow(z, 5) + 16 * z * z * z + 3 * z) / (96 * v * v);
}

LerFit fit_ler(const std::vector<FidelityPoint>& points) {
  LerFit fit;
  fit.points = points;
  fit.used.assign(points.size(), false);
  fit.residuals.assign(points.size(), kNaN);
  std::size_t k = 0;
  bool all_shots = true;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const FidelityPoint& pt = points[i];
    if (!(pt.fidelity > 0) || !std::isfinite(pt.fidelity)) {
      fit.warnings.push_back("dropped n=" + std::to_string(pt.cycles) + " with F=" +
                             std::to_string(pt.fidelity) + " (log undefined)");
      continue;
    }
    fit.used[i] = true;
    ++k;
    all_shots = all_shots && pt.shots > 0;
  }
  if (k < 2) {
    throw FitError("fit_ler: " + std::to_string(k) + " usable fidelity points, need at least 2");
  }
  fit.weighted = all_shots;
  std::vector<double> x, y, w;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!fit.used[i]) continue;
    const double f = points[i].fidelity;
    x.push_back(points[i].cycles);
    y.push_back(std::log(f));
    if (fit.weighted) {
      const double n = static_cast<double>(points[i].shots);
      // Var(F) = (1 - F^2) / N, floored so that F = 1 keeps a finite weight.
      const double var = std::max(1.0 - f * f, 1.0 / n) / (n * f * f);
      w.push_back(1.0 / var);
    } else {
      w.push_back(1.0);
    }
  }
  double sw = 0, mx = 0, my = 0;
  for (std::size_t i = 0; i < k; ++i) {
    sw += w[i];
    mx += w[i] * x[i];
    my += w[i] * y[i];
  }
  mx /= sw;
  my /= sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw FitError("fit_ler: all usable points share one cycle count");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0;
  for (std::size_t i = 0, j = 0; i < points.size(); ++i) {
    if (!fit.used[i]) continue;
    fit.residuals[i] = y[j] - (fit.intercept + fit.slope * x[j]);
    rss += w[j] * fit.residuals[i] * fit.residuals[i];
    ++j;
  }
  double crit = kZ95;
  if (fit.weighted) {
    fit.slope_se = std::sqrt(1.0 / sxx);
  } else if (k > 2) {
    fit.slope_se = std::sqrt(rss / static_cast<double>(k - 2) / sxx);
    crit = student_t95(static_cast<int>(k - 2));
  } else {
    fit.slope_se = kNaN;
  }
  fit.epsilon = clamp_epsilon(fit.slope);
  fit.epsilon_se = std::exp(fit.slope) / 2 * fit.slope_se;
  fit.f0 = std::exp(fit.intercept);
  fit.epsilon_ci = {clamp_epsilon(fit.slope + crit * fit.slope_se),
                    clamp_epsilon(fit.slope - crit * fit.slope_se)};
  if (fit.slope > 0) fit.warnings.push_back("fidelity grows with n; epsilon clamped to 0");
  return fit;
}

nlohmann::json LerFit::to_json() const {
  nlohmann::json res = nlohmann::json::array();
  for (double r : residuals) res.push_back(std::isnan(r) ? nlohmann::json(nullptr) : nlohmann::json(r));
  return {{"epsilon", epsilon},
          {"f0", f0},
          {"slope", slope},
          {"intercept", intercept},
          {"slope_se", std::isnan(slope_se) ? nlohmann::json(nullptr) : nlohmann::json(slope_se)},
          {"epsilon_se", std::isnan(epsilon_se) ? nlohmann::json(nullptr) : nlohmann::json(epsilon_se)},
          {"epsilon_ci", interval_json(epsilon_ci)},
          {"weighted", weighted},
          {"points", points_json(points)},
          {"used", used},
          {"residuals", res},
          {"warnings", warnings}};
}

ThresholdResult find_threshold(std::vector<DistanceCurve> curves, int bootstrap, std::uint64_t seed) {
  if (curves.size() < 2) {
    throw ParameterError("find_threshold: need at least two distances, got " + std::to_string(curves.size()));
  }
  for (DistanceCurve& c : curves) {
    if (c.points.size() < 2) {
      throw ParameterError("find_threshold: d=" + std::to_string(c.d) + " has fewer than two points");
    }
    std::sort(c.points.begin(), c.points.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.p < b.p; });
    for (const CurvePoint& pt : c.points) {
      if (!(pt.p > 0) || !(pt.ler > 0)) {
        throw ParameterError("find_threshold: d=" + std::to_string(c.d) +
                             " needs positive p and LER on a log scale");
      }
    }
  }
  std::sort(curves.begin(), curves.end(), [](const DistanceCurve& a, const DistanceCurve& b) { return a.d < b.d; });
  const DistanceCurve& a = curves[0];
  const DistanceCurve& b = curves[1];
  if (std::max(a.points.front().p, b.points.front().p) >= std::min(a.points.back().p, b.points.back().p)) {
    throw ParameterError("find_threshold: p grids of d=" + std::to_string(a.d) + " and d=" +
                         std::to_string(b.d) + " do not overlap");
  }
  ThresholdResult r;
  r.distances = {a.d, b.d};
  const Crossing c = crossing(a, b);
  r.bracketed = c.found;
  r.p_th = c.p;
  r.bracket = c.bracket;
  r.interpolation_bound = c.found ? (c.bracket.high - c.bracket.low) / 2 : kNaN;
  r.ci = {kNaN, kNaN};

  bool resamplable = false;
  for (const auto* cv : {&a, &b}) {
    for (const CurvePoint& pt : cv->points) resamplable = resamplable || pt.shots > 0 || !pt.fidelities.empty();
  }
  if (c.found && resamplable && bootstrap > 0) {
    StreamRng rng(derive_seed(seed, "bootstrap"));
    std::vector<double> estimates;
    auto resample = [&](const DistanceCurve& src, DistanceCurve& dst) {
      dst = src;
      for (CurvePoint& pt : dst.points) {
        if (!pt.fidelities.empty()) {
          for (FidelityPoint& fp : pt.fidelities) {
            if (fp.shots == 0) continue;
            std::binomial_distribution<std::size_t> bin(fp.shots, std::clamp((1 + fp.fidelity) / 2, 0.0, 1.0));
            fp.fidelity = 2.0 * static_cast<double>(bin(rng)) / static_cast<double>(fp.shots) - 1.0;
          }
          try {
            pt.ler = fit_ler(pt.fidelities).epsilon;
          } catch (const FitError&) {
            return false;
          }
        } else if (pt.shots > 0) {
          std::binomial_distribution<std::size_t> bin(pt.shots, std::clamp(pt.ler, 0.0, 1.0));
          pt.ler = static_cast<double>(bin(rng)) / static_cast<double>(pt.shots);
        }
        if (!(pt.ler > 0)) return false;
      }
      return true;
    };
    DistanceCurve ra, rb;
    for (int s = 0; s < bootstrap; ++s) {
      const bool ok_a = resample(a, ra);
      const bool ok_b = resample(b, rb);
      ++r.bootstrap_samples;
      if (!ok_a || !ok_b) continue;
      const Crossing bc = crossing(ra, rb);
      if (bc.found) estimates.push_back(bc.p);
    }
    r.bootstrap_bracketed = static_cast<int>(estimates.size());
    if (!estimates.empty()) {
      std::sort(estimates.begin(), estimates.end());
      auto q = [&](double f) {
        const auto i = static_cast<std::size_t>(std::floor(f * static_cast<double>(estimates.size() - 1) + 0.5));
        return estimates[i];
      };
      r.ci = {q(0.025), q(0.975)};
    }
  }
  r.curves = std::move(curves);
  return r;
}

nlohmann::json ThresholdResult::to_json() const {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json cj = nlohmann::json::array();
  for (const DistanceCurve& c : curves) {
    nlohmann::json pts = nlohmann::json::array();
    for (const CurvePoint& p : c.points) {
      nlohmann::json e = {{"p", p.p}, {"ler", p.ler}, {"shots", p.shots}};
      if (!p.fidelities.empty()) e["fidelities"] = points_json(p.fidelities);
      pts.push_back(e);
    }
    cj.push_back({{"d", c.d}, {"points", pts}});
  }
  return {{"bracketed", bracketed},
          {"p_th", bracketed ? num(p_th) : nlohmann::json("not bracketed")},
          {"bracket", {num(bracket.low), num(bracket.high)}},
          {"interpolation_bound", num(interpolation_bound)},
          {"ci", {num(ci.low), num(ci.high)}},
          {"bootstrap_samples", bootstrap_samples},
          {"bootstrap_bracketed", bootstrap_bracketed},
          {"distances", {distances.first, distances.second}},
          {"method", method},
          {"curves", cj}};
}

}  // namespace qecd
