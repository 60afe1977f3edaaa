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

#include "qecd/bench/latency.h"

#include <unistd.h>

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <random>

#include "qecd/decoder/decoder_net.h"
#include "qecd/eval/stats.h"
#include "qecd/util/errors.h"
#include "qecd/util/seed.h"

namespace qecd {
namespace {

using Clock = std::chrono::steady_clock;

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

// Smallest observable step of the clock, in nanoseconds.
double clock_tick_ns() {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    const auto a = Clock::now();
    auto b = Clock::now();
    while (b == a) b = Clock::now();
    best = std::min(best, std::chrono::duration<double, std::nano>(b - a).count());
  }
  const double period = 1e9 * Clock::period::num / Clock::period::den;
  return std::max(best, period);
}

std::string read_cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return line.substr(line.find_first_not_of(' ', colon + 1));
    }
  }
  return "unknown";
}

}  // namespace

EnvDescriptor EnvDescriptor::capture(unsigned threads) {
  EnvDescriptor e;
  char host[256] = {};
  if (gethostname(host, sizeof(host) - 1) == 0) e.host = host;
  if (e.host.empty()) e.host = "unknown";
  e.cpu = read_cpu_model();
#if defined(__clang__)
  e.compiler = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  e.compiler = std::string("gcc ") + __VERSION__;
#else
  e.compiler = "unknown";
#endif
  e.threads = threads == 0 ? 1 : threads;
  e.multithreaded = e.threads > 1;
  e.eigen_threads = Eigen::nbThreads();
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  e.timestamp = buf;
  return e;
}

nlohmann::json EnvDescriptor::to_json() const {
  return {{"host", host},       {"cpu", cpu},
          {"compiler", compiler}, {"threads", threads},
          {"multithreaded", multithreaded}, {"eigen_threads", eigen_threads},
          {"timestamp", timestamp}};
}

EnvDescriptor EnvDescriptor::from_json(const nlohmann::json& j) {
  for (const char* key : {"host", "threads", "multithreaded", "timestamp"}) {
    if (!j.is_object() || !j.contains(key)) {
      throw DataError(std::string("environment descriptor lacks '") + key + "'");
    }
  }
  EnvDescriptor e;
  e.host = j.at("host").get<std::string>();
  e.cpu = j.value("cpu", "unknown");
  e.compiler = j.value("compiler", "unknown");
  e.threads = j.at("threads").get<unsigned>();
  e.multithreaded = j.at("multithreaded").get<bool>();
  e.eigen_threads = j.value("eigen_threads", 1);
  e.timestamp = j.at("timestamp").get<std::string>();
  return e;
}

nlohmann::json BenchResult::to_json() const {
  nlohmann::json s = nlohmann::json::array();
  for (const BenchSample& b : samples) {
    s.push_back({{"d", b.d},
                 {"l", b.l},
                 {"median_ms", b.median_ms},
                 {"iqr_ms", b.iqr_ms},
                 {"reps", b.reps},
                 {"inner", b.inner}});
  }
  return {{"kind", mixer_name(kind)}, {"d_model", d_model}, {"batch", batch},
          {"warmup", warmup},         {"samples", s},       {"env", env.to_json()}};
}

BenchResult BenchResult::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("env")) {
    throw DataError("benchmark result without an environment descriptor");
  }
  BenchResult r;
  r.env = EnvDescriptor::from_json(j.at("env"));
  try {
    r.kind = parse_mixer(j.at("kind").get<std::string>());
    r.d_model = j.at("d_model").get<int>();
    r.batch = j.value("batch", 1);
    r.warmup = j.value("warmup", 10);
    for (const auto& s : j.at("samples")) {
      r.samples.push_back({s.at("d").get<int>(), s.at("l").get<int>(), s.at("median_ms").get<double>(),
                           s.at("iqr_ms").get<double>(), s.at("reps").get<int>(), s.value("inner", 1)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed benchmark result: ") + e.what());
  }
  return r;
}

std::vector<float> bench_input(int d, int d_model, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(d * d - 1) * static_cast<std::size_t>(d_model);
  StreamRng rng(derive_seed(derive_seed(seed, "bench"), static_cast<std::uint64_t>(d)));
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = normal(rng);
  return v;
}

BenchResult bench_block(MixerKind kind, const std::vector<int>& d_list, const BenchConfig& cfg) {
  if (d_list.empty() || !std::is_sorted(d_list.begin(), d_list.end())) {
    throw ParameterError("bench_block: d list must be non-empty and ascending");
  }
  if (cfg.reps < 30) throw ParameterError("bench_block: reps must be at least 30");
  if (cfg.warmup < 0 || cfg.d_model < 1) throw ParameterError("bench_block: invalid warmup or d_model");
  if (cfg.threads > 1) Eigen::setNbThreads(static_cast<int>(cfg.threads));
  BenchResult r;
  r.kind = kind;
  r.d_model = cfg.d_model;
  r.warmup = cfg.warmup;
  r.env = EnvDescriptor::capture(cfg.threads);
  const double tick_ns = clock_tick_ns();
  for (int d : d_list) {
    Hyperparams hp = Hyperparams::for_distance(d, kind);
    hp.d_model = cfg.d_model;
    hp.layers_per_step = 1;
    DecoderNet<float> net(d, hp);
    net.initialize(derive_seed(cfg.seed, "bench-weights"));
    const std::size_t l = static_cast<std::size_t>(d * d - 1);
    const Tensor<float> x({1, l, static_cast<std::size_t>(cfg.d_model)}, bench_input(d, cfg.d_model, cfg.seed));
    float sink = 0;
    for (int i = 0; i < cfg.warmup; ++i) sink += net.mixer(x, 0).values()[0];
    BenchSample s;
    s.d = d;
    s.l = static_cast<int>(l);
    s.reps = cfg.reps;
    while (true) {
      std::vector<double> ms(static_cast<std::size_t>(cfg.reps));
      for (double& t : ms) {
        const auto t0 = Clock::now();
        for (int k = 0; k < s.inner; ++k) sink += net.mixer(x, 0).values()[0];
        t = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      }
      const double median = quantile(ms, 0.5);
      if (median * 1e6 >= cfg.min_ticks * tick_ns) {
        s.median_ms = median / s.inner;
        s.iqr_ms = (quantile(ms, 0.75) - quantile(ms, 0.25)) / s.inner;
        break;
      }
      if (s.inner * 10 > cfg.max_inner) {
        throw NumericError("bench_block: d=" + std::to_string(d) + " stays below " +
                           std::to_string(cfg.min_ticks) + " timer ticks at " +
                           std::to_string(s.inner) + " forwards per repetition");
      }
      s.inner *= 10;
    }
    if (!std::isfinite(sink)) throw NumericError("bench_block: non-finite mixer output");
    r.samples.push_back(s);
  }
  return r;
}

ExponentFit fit_scaling_exponent(const BenchResult& result) {
  std::vector<BenchSample> s = result.samples;
  std::sort(s.begin(), s.end(), [](const BenchSample& a, const BenchSample& b) { return a.d < b.d; });
  if (s.size() < 4) {
    throw ParameterError("fit_scaling_exponent: need at least four distances, got " + std::to_string(s.size()));
  }
  if (s.back().d < 3 * s.front().d) {
    throw ParameterError("fit_scaling_exponent: distances must span a factor of three");
  }
  for (const BenchSample& b : s) {
    if (!(b.median_ms > 0)) {
      throw DataError("fit_scaling_exponent: non-positive time at d=" + std::to_string(b.d));
    }
  }
  const std::size_t m = (s.size() + 1) / 2;
  ExponentFit f;
  std::vector<double> x, y;
  for (std::size_t i = s.size() - m; i < s.size(); ++i) {
    f.window.push_back(s[i].d);
    x.push_back(std::log(static_cast<double>(s[i].d)));
    y.push_back(std::log(s[i].median_ms));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  f.k = sxy / sxx;
  f.intercept = my - f.k * mx;
  if (m >= 3) {
    double rss = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double e = y[i] - f.intercept - f.k * x[i];
      rss += e * e;
    }
    const double se = std::sqrt(rss / static_cast<double>(m - 2) / sxx);
    const double t = student_t95(static_cast<int>(m - 2));
    f.ci_low = f.k - t * se;
    f.ci_high = f.k + t * se;
  } else {
    f.ci_low = f.ci_high = std::numeric_limits<double>::quiet_NaN();
  }
  return f;
}

BenchResult synthetic_bench(MixerKind kind, const std::vector<int>& d_list, double k, double c,
                            double noise, std::uint64_t seed) {
  BenchResult r;
  r.kind = kind;
  r.env = EnvDescriptor::capture(1);
  StreamRng rng(derive_seed(seed, "synthetic"));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int d : d_list) {
    BenchSample s;
    s.d = d;
    s.l = d * d - 1;
    s.median_ms = c * std::pow(static_cast<double>(d), k) * (1.0 + noise * normal(rng));
    s.reps = 30;
    r.samples.push_back(s);
  }
  return r;
}

}  // namespace qecd
