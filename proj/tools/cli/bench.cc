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

#include <cmath>
#include <cstdio>
#include <sstream>

#include "cli/app.h"
#include "qecd/bench/latency.h"
#include "qecd/util/errors.h"

namespace qecd::cli {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

nlohmann::json exponent_json(const BenchResult& r, const ExponentFit& f) {
  return {{"kind", mixer_name(r.kind)}, {"k", f.k},       {"intercept", f.intercept},
          {"ci_low", f.ci_low},         {"ci_high", f.ci_high}, {"window", f.window}};
}

/// Power laws the self-test must recover exactly.
constexpr double kSelfTestExponent(MixerKind k) { return k == MixerKind::kAttention ? 4.0 : 2.0; }

class BenchCommand : public Command {
 public:
  explicit BenchCommand(CLI::App* app) : flags_(app) {
    app->add_option("--config", config_, "JSON config or run manifest");
    app->add_option("--out", out_, "Output directory")->required();
    app->add_option("--refit", refit_, "Refit exponents from an earlier bench.json instead of timing");
    threads_opt_ = app->add_option("--threads", threads_,
                                   "Eigen worker threads; above 1 the run is marked multithreaded");
    flags_.add("--kinds", "kinds", ValueType::kStringList, "Mixer kinds, comma separated");
    flags_.add("--d-list", "d_list", ValueType::kIntList, "Ascending code distances");
    flags_.add("--reps", "reps", ValueType::kInt, "Timed repetitions per distance (>= 30)");
    flags_.add("--warmup", "warmup", ValueType::kInt, "Discarded warmup repetitions");
    flags_.add("--d-model", "d_model", ValueType::kInt, "Model width");
    flags_.add("--seed", "seed", ValueType::kInt, "Input data seed");
    flags_.add("--self-test", "self_test", ValueType::kBool,
               "Fit synthetic power laws (attention d^4, mamba d^2) instead of timing");
  }

  int run(const Invocation& inv) override {
    nlohmann::json user = config_.empty() ? nlohmann::json::object() : load_config(config_);
    flags_.apply(user);
    const nlohmann::json defaults = {{"kinds", {"mamba", "attention"}},
                                     {"d_list", {11, 15, 21, 31, 41}},
                                     {"reps", 30},
                                     {"warmup", 10},
                                     {"d_model", 256},
                                     {"seed", 0},
                                     {"self_test", false}};
    nlohmann::json cfg = with_defaults(user, defaults, "bench");
    BenchConfig bc;
    bc.reps = cfg["reps"].get<int>();
    bc.warmup = cfg["warmup"].get<int>();
    bc.d_model = cfg["d_model"].get<int>();
    bc.seed = cfg["seed"].get<std::uint64_t>();
    const unsigned requested = cli_threads(threads_opt_, threads_);
    bc.threads = requested == 0 ? 1 : requested;
    if (bc.warmup < 0 || bc.d_model <= 0) throw ParameterError("bench: --warmup and --d-model out of range");
    std::vector<int> d_list;
    for (const auto& v : cfg["d_list"]) d_list.push_back(v.get<int>());
    std::vector<MixerKind> kinds;
    for (const auto& v : cfg["kinds"]) kinds.push_back(parse_mixer(v.get<std::string>()));
    if (kinds.empty()) throw ParameterError("bench: --kinds is empty");
    const bool self_test = cfg["self_test"].get<bool>();

    RunRecorder rec("bench", inv.argv, out_);
    if (!config_.empty()) rec.add_input(config_);
    std::vector<BenchResult> results;
    if (!refit_.empty()) {
      rec.add_input(refit_);
      const nlohmann::json old = read_json_file(refit_);
      if (!old.contains("results")) throw DataError(refit_ + " holds no benchmark results");
      for (const auto& r : old["results"]) results.push_back(BenchResult::from_json(r));
      cfg["refit"] = refit_;
    } else {
      for (MixerKind k : kinds) {
        if (self_test) {
          BenchResult r = synthetic_bench(k, d_list, kSelfTestExponent(k), 1e-3);
          r.d_model = bc.d_model;
          r.env = EnvDescriptor::capture(bc.threads);
          results.push_back(r);
        } else {
          std::printf("timing %s over %zu distances\n", mixer_name(k).c_str(), d_list.size());
          std::fflush(stdout);
          results.push_back(bench_block(k, d_list, bc));
        }
      }
    }
    rec.set_config(cfg, bc.seed);

    bool self_test_ok = true;
    nlohmann::json summary = {{"results", nlohmann::json::array()},
                              {"exponents", nlohmann::json::array()},
                              {"synthetic", self_test},
                              {"env", EnvDescriptor::capture(bc.threads).to_json()}};
    std::ostringstream csv;
    csv << "kind,d,l,median_ms,iqr_ms,reps\n";
    for (const BenchResult& r : results) {
      summary["results"].push_back(r.to_json());
      for (const BenchSample& s : r.samples) {
        csv << mixer_name(r.kind) << ',' << s.d << ',' << s.l << ',' << fmt(s.median_ms) << ','
            << fmt(s.iqr_ms) << ',' << s.reps << '\n';
      }
      const ExponentFit f = fit_scaling_exponent(r);
      nlohmann::json e = exponent_json(r, f);
      if (self_test) {
        const bool ok = std::abs(f.k - kSelfTestExponent(r.kind)) <= 1e-6;
        e["expected"] = kSelfTestExponent(r.kind);
        e["pass"] = ok;
        self_test_ok = self_test_ok && ok;
      }
      summary["exponents"].push_back(e);
      std::printf("%-9s exponent %.4f  95%% CI [%.4f, %.4f] over d in", mixer_name(r.kind).c_str(), f.k,
                  f.ci_low, f.ci_high);
      for (int d : f.window) std::printf(" %d", d);
      std::printf("\n");
    }
    write_text(rec.out("bench.csv"), csv.str());
    write_text(rec.out("bench.json"), summary.dump(2) + "\n");
    rec.add_output(rec.out("bench.csv"));
    rec.add_output(rec.out("bench.json"));
    if (!self_test && refit_.empty()) {
      // Timings vary run to run; the data they were measured on must not.
      std::ostringstream in;
      in << "d,l,d_model,seed,sha256\n";
      for (int d : d_list) {
        const std::vector<float> x = bench_input(d, bc.d_model, bc.seed);
        in << d << ',' << d * d - 1 << ',' << bc.d_model << ',' << bc.seed << ','
           << sha256_bytes(x.data(), x.size() * sizeof(float)) << '\n';
      }
      write_text(rec.out("bench_inputs.csv"), in.str());
      rec.add_output(rec.out("bench_inputs.csv"));
    }
    rec.finish(self_test_ok ? "ok" : "self-test failed");
    if (self_test) std::printf("self-test %s\n", self_test_ok ? "passed" : "FAILED");
    return self_test_ok ? kExitOk : kExitNumeric;
  }

 private:
  ConfigFlags flags_;
  std::string config_;
  std::string out_;
  std::string refit_;
  unsigned threads_ = 0;
  CLI::Option* threads_opt_ = nullptr;
};

}  // namespace

std::unique_ptr<Command> make_bench(CLI::App* app) { return std::make_unique<BenchCommand>(app); }

}  // namespace qecd::cli
