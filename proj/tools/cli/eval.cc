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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli/app.h"
#include "qecd/eval/protocols.h"
#include "qecd/eval/stats.h"
#include "qecd/noise/noise_model.h"
#include "qecd/tensor/checkpoint.h"
#include "qecd/train/trainer.h"
#include "qecd/util/errors.h"

namespace qecd::cli {
namespace {
namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::vector<int> as_ints(const nlohmann::json& j) {
  std::vector<int> out;
  for (const auto& v : j) out.push_back(v.get<int>());
  return out;
}

const nlohmann::json& eval_defaults() {
  static const nlohmann::json j = {
      {"mode", "memory"}, {"d", 0},           {"basis", "z"},        {"p", 0.002},
      {"shots", 10000},   {"seed", 0},        {"idle_noise", true},  {"cycles", nlohmann::json::array()},
      {"schedule", ""},   {"alpha", 7.623e-6}, {"pdec", -1.0},       {"baseline", false},
      {"chunk", 256}};
  return j;
}

void write_endpoint_files(RunRecorder& rec, const EvalResult& r, bool plot) {
  std::ostringstream ep;
  ep << "cycles,shots,correct,fidelity,accuracy_low,accuracy_high\n";
  for (const EndpointResult& e : r.endpoints) {
    ep << e.cycles << ',' << e.shots << ',' << e.correct << ',' << fmt(e.fidelity) << ','
       << fmt(e.accuracy_ci.low) << ',' << fmt(e.accuracy_ci.high) << '\n';
  }
  write_text(rec.out("endpoints.csv"), ep.str());
  rec.add_output(rec.out("endpoints.csv"));
  if (r.mode == "realtime") {
    std::ostringstream inj;
    inj << "round,p_dec\n";
    for (const InjectionEvent& e : r.injections) inj << e.round << ',' << fmt(e.p_dec) << '\n';
    write_text(rec.out("injections.csv"), inj.str());
    rec.add_output(rec.out("injections.csv"));
  }
  if (!plot) return;
  // Measured fidelity with its 95% band next to the fitted decay curve.
  std::ostringstream fd;
  fd << "cycles,fidelity,fidelity_low,fidelity_high,fitted\n";
  for (const EndpointResult& e : r.endpoints) {
    const double fit = r.fit ? r.fit->f0 * std::pow(1.0 - 2.0 * r.fit->epsilon, e.cycles) : NAN;
    fd << e.cycles << ',' << fmt(e.fidelity) << ',' << fmt(2 * e.accuracy_ci.low - 1) << ','
       << fmt(2 * e.accuracy_ci.high - 1) << ',' << fmt(fit) << '\n';
  }
  const std::string name = "fidelity_decay_" + r.mode + ".csv";
  write_text(rec.out(name), fd.str());
  rec.add_output(rec.out(name));
}

class EvalCommand : public Command {
 public:
  explicit EvalCommand(CLI::App* app) : flags_(app) {
    app->add_option("--config", config_, "JSON config or run manifest");
    app->add_option("--ckpt", ckpt_, "Decoder checkpoint (EMA weights are used when present)");
    app->add_option("--out", out_, "Output directory")->required();
    threads_opt_ = app->add_option("--threads", threads_, "Worker cap (default $QECD_THREADS, else all cores)");
    app->add_flag("--emit-plot-data", plot_, "Write plot-ready CSV series");
    flags_.add("--mode", "mode", ValueType::kString, "memory or realtime");
    flags_.add("--d", "d", ValueType::kInt, "Code distance (must match the checkpoint)");
    flags_.add("--basis", "basis", ValueType::kString, "Memory basis: z or x");
    flags_.add("--p", "p", ValueType::kDouble, "SI1000 base error rate");
    flags_.add("--shots", "shots", ValueType::kInt, "Shots per endpoint");
    flags_.add("--seed", "seed", ValueType::kInt, "Sampling seed");
    flags_.add("--idle-noise,!--no-idle-noise", "idle_noise", ValueType::kBool, "Idle depolarization");
    flags_.add("--cycles", "cycles", ValueType::kIntList, "Memory-mode cycle counts (default k(2d+1), k=1..4)");
    flags_.add("--schedule", "schedule", ValueType::kString,
               "Real-time decoder-noise schedule: mamba or attention (default: checkpoint mixer)");
    flags_.add("--alpha", "alpha", ValueType::kDouble, "Decoder-noise scale");
    flags_.add("--pdec", "pdec", ValueType::kDouble, "Force the injected decoder-noise rate");
    flags_.add("--baseline", "baseline", ValueType::kBool,
               "Use the constant no-flip predictor instead of a checkpoint");
    flags_.add("--chunk", "chunk", ValueType::kInt, "Shots decoded together");
  }

  int run(const Invocation& inv) override {
    nlohmann::json user = config_.empty() ? nlohmann::json::object() : load_config(config_);
    flags_.apply(user);
    nlohmann::json cfg = with_defaults(user, eval_defaults(), "eval");
    const bool baseline = cfg["baseline"].get<bool>();
    if (baseline == !ckpt_.empty()) throw ParameterError("eval: give exactly one of --ckpt and --baseline");
    const std::string mode = cfg["mode"].get<std::string>();
    if (mode != "memory" && mode != "realtime") throw ParameterError("eval: --mode must be memory or realtime");

    std::optional<DecoderNet<float>> net;
    std::optional<MixerKind> ckpt_mixer;
    int d = cfg["d"].get<int>();
    if (!baseline) {
      const Checkpoint ck = load_checkpoint(ckpt_);
      net.emplace(inference_decoder(ck, std::nullopt, d > 0 ? std::optional<int>(d) : std::nullopt));
      d = net->distance();
      ckpt_mixer = net->hyperparams().mixer;
    }
    if (d < 3 || d % 2 == 0) throw ParameterError("eval: --d must be odd and >= 3");
    cfg["d"] = d;

    EvalSpec spec;
    spec.d = d;
    spec.basis = parse_basis(cfg["basis"].get<std::string>());
    spec.p = cfg["p"].get<double>();
    spec.idle_noise = cfg["idle_noise"].get<bool>();
    const long long shots = cfg["shots"].get<long long>();
    const long long chunk = cfg["chunk"].get<long long>();
    if (shots <= 0 || chunk <= 0) throw ParameterError("eval: --shots and --chunk must be positive");
    spec.shots = static_cast<std::size_t>(shots);
    spec.chunk = static_cast<std::size_t>(chunk);
    spec.seed = cfg["seed"].get<std::uint64_t>();
    spec.threads = cli_threads(threads_opt_, threads_);
    NoiseParams{spec.p, spec.idle_noise}.validate();

    RunRecorder rec("eval", inv.argv, out_);
    if (!config_.empty()) rec.add_input(config_);
    if (!ckpt_.empty()) rec.add_input(ckpt_);
    const DecoderNet<float>* model = net ? &*net : nullptr;
    EvalResult result;
    if (mode == "memory") {
      std::vector<int> cycles = as_ints(cfg["cycles"]);
      if (cycles.empty()) cycles = realtime_endpoints(d);
      std::sort(cycles.begin(), cycles.end());
      cycles.erase(std::unique(cycles.begin(), cycles.end()), cycles.end());
      cfg["cycles"] = cycles;
      cfg.erase("schedule");
      cfg.erase("alpha");
      cfg.erase("pdec");
      result = memory_eval(model, spec, cycles);
    } else {
      if (!cfg["cycles"].empty()) throw ParameterError("eval: --cycles applies to memory mode only");
      std::string sched = cfg["schedule"].get<std::string>();
      if (sched.empty()) {
        if (!ckpt_mixer) throw ParameterError("eval: --baseline in realtime mode needs --schedule");
        sched = mixer_name(*ckpt_mixer);
      }
      const MixerKind schedule = parse_mixer(sched);
      cfg["schedule"] = mixer_name(schedule);
      cfg.erase("cycles");
      const double pdec = cfg["pdec"].get<double>();
      std::optional<double> forced;
      if (pdec >= 0) {
        if (pdec > 0.75) throw ParameterError("eval: --pdec must lie in [0, 0.75]");
        forced = pdec;
      } else {
        cfg.erase("pdec");
      }
      result = realtime_eval(model, spec, schedule, cfg["alpha"].get<double>(), forced);
    }
    rec.set_config(cfg, spec.seed);

    nlohmann::json summary = result.to_json();
    summary["decoder"] = baseline ? "constant no-flip predictor" : ckpt_;
    write_text(rec.out("eval.json"), summary.dump(2) + "\n");
    rec.add_output(rec.out("eval.json"));
    write_endpoint_files(rec, result, plot_);
    rec.finish();

    for (const EndpointResult& e : result.endpoints) {
      std::printf("cycles %3d  fidelity %.5f  (%zu/%zu correct)\n", e.cycles, e.fidelity, e.correct, e.shots);
    }
    for (const InjectionEvent& e : result.injections) {
      std::printf("injection after round %d, p_dec %.6g\n", e.round, e.p_dec);
    }
    if (result.fit) {
      std::printf("LER %.6g  95%% CI [%.6g, %.6g]\n", result.fit->epsilon, result.fit->epsilon_ci.low,
                  result.fit->epsilon_ci.high);
    } else {
      std::printf("LER not fitted: %s\n", result.fit_error.c_str());
    }
    return kExitOk;
  }

 private:
  ConfigFlags flags_;
  std::string config_;
  std::string ckpt_;
  std::string out_;
  bool plot_ = false;
  unsigned threads_ = 0;
  CLI::Option* threads_opt_ = nullptr;
};

/// Rows "d,p,ler[,shots]" from one CSV file, header required.
void read_curve_csv(const std::string& path, std::map<int, DistanceCurve>& curves) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + " is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto col = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int cd = col("d"), cp = col("p"), cl = col("ler"), cs = col("shots");
  if (cd < 0 || cp < 0 || cl < 0) throw DataError(path + ": header needs d, p and ler columns");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    try {
      const int d = std::stoi(cells.at(cd));
      CurvePoint pt;
      pt.p = std::stod(cells.at(cp));
      pt.ler = std::stod(cells.at(cl));
      if (cs >= 0 && static_cast<std::size_t>(cs) < cells.size() && !cells[cs].empty()) {
        pt.shots = static_cast<std::size_t>(std::stoull(cells[cs]));
      }
      curves[d].d = d;
      curves[d].points.push_back(pt);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed row");
    }
  }
}

class ThresholdCommand : public Command {
 public:
  explicit ThresholdCommand(CLI::App* app) : flags_(app) {
    app->add_option("--config", config_, "JSON config or run manifest");
    app->add_option("--curves", curves_, "CSV file or directory of CSVs with columns d,p,ler[,shots]");
    app->add_option("--ckpts", ckpts_, "Checkpoints, one per distance, evaluated over --p-grid")->delimiter(',');
    app->add_option("--out", out_, "Output directory")->required();
    threads_opt_ = app->add_option("--threads", threads_, "Worker cap (default $QECD_THREADS, else all cores)");
    app->add_flag("--emit-plot-data", plot_, "Write the LER curves as a plot-ready CSV");
    flags_.add("--p-grid", "p_grid", ValueType::kDoubleList, "Physical error rates for --ckpts");
    flags_.add("--shots", "shots", ValueType::kInt, "Shots per endpoint for --ckpts");
    flags_.add("--seed", "seed", ValueType::kInt, "Sampling and bootstrap seed");
    flags_.add("--bootstrap", "bootstrap", ValueType::kInt, "Bootstrap resamples for the CI");
  }

  int run(const Invocation& inv) override {
    nlohmann::json user = config_.empty() ? nlohmann::json::object() : load_config(config_);
    flags_.apply(user);
    const nlohmann::json defaults = {
        {"p_grid", nlohmann::json::array()}, {"shots", 10000}, {"seed", 0}, {"bootstrap", 1000}};
    nlohmann::json cfg = with_defaults(user, defaults, "threshold");
    if (curves_.empty() == ckpts_.empty()) throw ParameterError("threshold: give exactly one of --curves and --ckpts");
    const int bootstrap = cfg["bootstrap"].get<int>();
    if (bootstrap < 0) throw ParameterError("threshold: --bootstrap must be >= 0");
    const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();

    RunRecorder rec("threshold", inv.argv, out_);
    if (!config_.empty()) rec.add_input(config_);
    std::map<int, DistanceCurve> by_d;
    if (!curves_.empty()) {
      if (!fs::exists(curves_)) throw DataError("no curve data at " + curves_);
      std::vector<std::string> files;
      if (fs::is_directory(curves_)) {
        for (const auto& e : fs::directory_iterator(curves_)) {
          if (e.path().extension() == ".csv") files.push_back(e.path().string());
        }
        std::sort(files.begin(), files.end());
      } else {
        files.push_back(curves_);
      }
      for (const std::string& f : files) {
        read_curve_csv(f, by_d);
        rec.add_input(f);
      }
      cfg["curves"] = curves_;
    } else {
      std::vector<double> grid;
      for (const auto& v : cfg["p_grid"]) grid.push_back(v.get<double>());
      if (grid.empty()) throw ParameterError("threshold: --ckpts needs --p-grid");
      std::sort(grid.begin(), grid.end());
      EvalSpec spec;
      spec.shots = static_cast<std::size_t>(cfg["shots"].get<long long>());
      spec.seed = seed;
      spec.threads = cli_threads(threads_opt_, threads_);
      for (const std::string& path : ckpts_) {
        const DecoderNet<float> net = inference_decoder(load_checkpoint(path));
        rec.add_input(path);
        spec.d = net.distance();
        if (by_d.count(spec.d)) throw DataError("threshold: two checkpoints for d=" + std::to_string(spec.d));
        for (double p : grid) {
          spec.p = p;
          const EvalResult r = memory_eval(&net, spec, realtime_endpoints(spec.d));
          if (!r.fit) throw FitError("d=" + std::to_string(spec.d) + ", p=" + fmt(p) + ": " + r.fit_error);
          CurvePoint pt{p, r.fit->epsilon, spec.shots, r.fit->points};
          by_d[spec.d].d = spec.d;
          by_d[spec.d].points.push_back(pt);
          std::printf("d=%d p=%g LER %.6g\n", spec.d, p, pt.ler);
        }
      }
      cfg["ckpts"] = ckpts_;
    }
    if (by_d.size() < 2) {
      throw DataError("threshold: need LER curves for at least two distances, found " +
                      std::to_string(by_d.size()));
    }
    std::vector<DistanceCurve> curves;
    for (auto& [d, c] : by_d) {
      std::sort(c.points.begin(), c.points.end(),
                [](const CurvePoint& a, const CurvePoint& b) { return a.p < b.p; });
      curves.push_back(c);
    }
    rec.set_config(cfg, seed);
    ThresholdResult th;
    try {
      th = find_threshold(curves, bootstrap, seed);
    } catch (const ParameterError& e) {
      // Curves that exist but cannot be compared are a data problem.
      throw DataError(e.what());
    }
    write_text(rec.out("threshold.json"), th.to_json().dump(2) + "\n");
    rec.add_output(rec.out("threshold.json"));
    if (plot_) {
      std::ostringstream os;
      os << "d,p,ler,shots\n";
      for (const DistanceCurve& c : curves) {
        for (const CurvePoint& pt : c.points) os << c.d << ',' << fmt(pt.p) << ',' << fmt(pt.ler) << ',' << pt.shots << '\n';
      }
      write_text(rec.out("ler_vs_p.csv"), os.str());
      rec.add_output(rec.out("ler_vs_p.csv"));
    }
    rec.finish();
    if (th.bracketed) {
      std::printf("p_th %.6g  bracket [%.6g, %.6g]  95%% CI [%.6g, %.6g]\n", th.p_th, th.bracket.low,
                  th.bracket.high, th.ci.low, th.ci.high);
    } else {
      std::printf("p_th not bracketed\n");
    }
    return kExitOk;
  }

 private:
  ConfigFlags flags_;
  std::string config_;
  std::string curves_;
  std::vector<std::string> ckpts_;
  std::string out_;
  bool plot_ = false;
  unsigned threads_ = 0;
  CLI::Option* threads_opt_ = nullptr;
};

}  // namespace

std::unique_ptr<Command> make_eval(CLI::App* app) { return std::make_unique<EvalCommand>(app); }
std::unique_ptr<Command> make_threshold(CLI::App* app) { return std::make_unique<ThresholdCommand>(app); }

}  // namespace qecd::cli
