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

#include <cstdio>

#include "cli/app.h"
#include "qecd/code/circuit.h"
#include "qecd/noise/batch.h"
#include "qecd/noise/dem.h"
#include "qecd/noise/frame_sim.h"
#include "qecd/noise/noise_model.h"
#include "qecd/util/errors.h"

namespace qecd::cli {
namespace {

const nlohmann::json& gen_defaults() {
  static const nlohmann::json j = {
      {"d", 3},          {"basis", "z"},      {"cycles", 0},        {"p", 0.002},
      {"shots", 1000},   {"seed", 0},         {"idle_noise", true}, {"pdec_arch", ""},
      {"pdec_alpha", 7.623e-6}, {"block", 0}, {"dem", false},       {"csv", false}};
  return j;
}

class GenCommand : public Command {
 public:
  explicit GenCommand(CLI::App* app) : flags_(app) {
    app->add_option("--config", config_, "JSON config or run manifest");
    app->add_option("--out", out_, "Output directory")->required();
    threads_opt_ = app->add_option("--threads", threads_, "Worker cap (default $QECD_THREADS, else all cores)");
    flags_.add("--d", "d", ValueType::kInt, "Code distance (odd, >= 3)");
    flags_.add("--basis", "basis", ValueType::kString, "Memory basis: z or x");
    flags_.add("--cycles", "cycles", ValueType::kInt, "Syndrome cycles (default 2d+1)");
    flags_.add("--p", "p", ValueType::kDouble, "SI1000 base error rate");
    flags_.add("--shots", "shots", ValueType::kInt, "Number of shots");
    flags_.add("--seed", "seed", ValueType::kInt, "Sampling seed");
    flags_.add("--idle-noise,!--no-idle-noise", "idle_noise", ValueType::kBool, "Idle depolarization");
    flags_.add("--pdec-arch", "pdec_arch", ValueType::kString,
               "Add decoder-latency noise scaled for this mixer (mamba: alpha d^2, attention: alpha d^4)");
    flags_.add("--pdec-alpha", "pdec_alpha", ValueType::kDouble, "Decoder-noise scale (needs --pdec-arch)");
    flags_.add("--block", "block", ValueType::kInt,
               "Cycles between decoder-noise injections (needs --pdec-arch; default 2d+1)");
    flags_.add("--dem", "dem", ValueType::kBool, "Sample from the extracted detector error model");
    flags_.add("--csv", "csv", ValueType::kBool, "Also write the batch as CSV");
  }

  int run(const Invocation& inv) override {
    nlohmann::json user = config_.empty() ? nlohmann::json::object() : load_config(config_);
    flags_.apply(user);
    const bool has_arch = user.contains("pdec_arch") && !user["pdec_arch"].get<std::string>().empty();
    if (!has_arch && (user.contains("pdec_alpha") || user.contains("block"))) {
      throw ParameterError("gen: --pdec-alpha and --block require --pdec-arch");
    }
    nlohmann::json cfg = with_defaults(user, gen_defaults(), "gen");
    const int d = cfg["d"].get<int>();
    if (d < 3 || d % 2 == 0) throw ParameterError("gen: --d must be odd and >= 3");
    const Basis basis = parse_basis(cfg["basis"].get<std::string>());
    int cycles = cfg["cycles"].get<int>();
    if (cycles == 0) cycles = 2 * d + 1;
    if (cycles < 1) throw ParameterError("gen: --cycles must be positive");
    const long long shots = cfg["shots"].get<long long>();
    if (shots <= 0) throw ParameterError("gen: --shots must be positive");
    const double p = cfg["p"].get<double>();
    const NoiseParams noise{p, cfg["idle_noise"].get<bool>()};
    noise.validate();
    const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
    cfg["cycles"] = cycles;

    StabilizerCircuit circuit = annotate_si1000(build_memory_circuit(build_layout(d), basis, cycles), noise);
    double p_dec = 0.0;
    if (has_arch) {
      const MixerKind arch = parse_mixer(cfg["pdec_arch"].get<std::string>());
      const double alpha = cfg["pdec_alpha"].get<double>();
      if (!(alpha >= 0)) throw ParameterError("gen: --pdec-alpha must be >= 0");
      int block = cfg["block"].get<int>();
      if (block == 0) block = 2 * d + 1;
      if (block < 1) throw ParameterError("gen: --block must be positive");
      p_dec = decoder_noise_strength(DecoderNoiseSpec::for_mixer(arch, alpha), d);
      circuit = inject_decoder_noise(circuit, p_dec, block);
      cfg["pdec_arch"] = mixer_name(arch);
      cfg["block"] = block;
    } else {
      cfg.erase("pdec_alpha");
      cfg.erase("block");
    }

    RunRecorder rec("gen", inv.argv, out_);
    rec.set_config(cfg, seed);
    if (!config_.empty()) rec.add_input(config_);
    const unsigned threads = cli_threads(threads_opt_, threads_);
    const FrameSimulator sim(circuit);
    SyndromeBatch batch;
    if (cfg["dem"].get<bool>()) {
      // One circuit shot supplies the shape and metadata.
      const SyndromeBatch probe = sim.sample(1, seed, 1);
      batch = dem_sample(extract_dem(sim), probe.rows, probe.slots, static_cast<std::size_t>(shots), seed,
                         threads);
      batch.meta = probe.meta;
      batch.meta.shots = static_cast<std::size_t>(shots);
      batch.meta.source = "dem";
    } else {
      batch = sim.sample(static_cast<std::size_t>(shots), seed, threads);
    }
    const std::string synb = rec.out("batch.synb");
    write_synb(synb, batch);
    rec.add_output(synb);
    if (cfg["csv"].get<bool>()) {
      write_batch_csv(rec.out("batch.csv"), batch);
      rec.add_output(rec.out("batch.csv"));
    }
    rec.finish();
    long ones = 0;
    for (std::uint8_t l : batch.labels) ones += l;
    std::printf("wrote %s: %lld shots, %zu rows x %zu slots, p_dec %.6g, event fraction %.5f, flip fraction %.5f\n",
                synb.c_str(), shots, batch.rows, batch.slots, p_dec, detection_fraction(batch),
                static_cast<double>(ones) / static_cast<double>(shots));
    return kExitOk;
  }

 private:
  ConfigFlags flags_;
  std::string config_;
  std::string out_;
  unsigned threads_ = 0;
  CLI::Option* threads_opt_ = nullptr;
};

class VerifyCommand : public Command {
 public:
  explicit VerifyCommand(CLI::App* app) {
    app->add_option("dir", dir_, "Output directory holding manifest.json")->required();
  }

  int run(const Invocation&) override {
    const std::vector<std::string> bad = verify_manifest(dir_);
    for (const std::string& b : bad) std::printf("MISMATCH %s\n", b.c_str());
    if (!bad.empty()) return kExitMissingData;
    std::printf("all outputs verify\n");
    return kExitOk;
  }

 private:
  std::string dir_;
};

}  // namespace

std::unique_ptr<Command> make_gen(CLI::App* app) { return std::make_unique<GenCommand>(app); }
std::unique_ptr<Command> make_verify(CLI::App* app) { return std::make_unique<VerifyCommand>(app); }

}  // namespace qecd::cli
