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

#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli/app.h"
#include "cli/manifest.h"
#include "qecd/noise/batch.h"

namespace qecd::cli {
namespace {
namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("qecd_cli_" + std::string(info->name()) + "_" +
                                        std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static int run(std::vector<std::string> args) {
    args.insert(args.begin(), "qecd");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::vector<std::string>> csv_rows(const std::string& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string c;
      while (std::getline(ss, c, ',')) cells.push_back(c);
      rows.push_back(cells);
    }
    return rows;
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  // A training config small enough to run in about a second.
  void write_tiny_config(const std::string& name, const std::string& extra = "") const {
    write(name, R"({"d": 3, "p": 0.01, "batch": 16, "iterations": 30, "lr_init": 1e-3, "lr_min": 1e-4,
      "model": {"d_model": 16, "layers_per_step": 1, "heads": 2, "d_attn": 8, "d_b": 16,
                "d_state": 4, "d_read": 16, "l_read": 2, "w_gate": 2},
      "log_every": 5, "eval_every": 10, "ckpt_every": 10, "eval_shots": 128, "seed": 3)" +
                    extra + "}");
  }

  fs::path dir_;
};

TEST_F(CliTest, GenWritesHeaderMatchingFlags) {
  ASSERT_EQ(run({"gen", "--d", "3", "--cycles", "7", "--p", "0.002", "--shots", "1000", "--seed", "1",
                 "--out", path("g")}),
            kExitOk);
  const SyndromeBatch b = read_synb(path("g/batch.synb"));
  EXPECT_EQ(b.meta.d, 3);
  EXPECT_EQ(b.meta.cycles, 7);
  EXPECT_DOUBLE_EQ(b.meta.p, 0.002);
  EXPECT_EQ(b.meta.seed, 1u);
  EXPECT_EQ(b.shots(), 1000u);
  EXPECT_EQ(b.rows, 8u);
  EXPECT_EQ(b.slots, 8u);
}

TEST_F(CliTest, GenIsDeterministicAcrossRunsAndThreads) {
  const std::vector<std::string> flags = {"gen", "--d", "3", "--cycles", "7", "--p", "0.002",
                                          "--shots", "1000", "--seed", "1"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = flags;
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  ASSERT_EQ(run(with({"--out", path("a"), "--threads", "1"})), kExitOk);
  ASSERT_EQ(run(with({"--out", path("b"), "--threads", "4"})), kExitOk);
  EXPECT_EQ(slurp(path("a/batch.synb")), slurp(path("b/batch.synb")));
}

TEST_F(CliTest, GenAtZeroNoiseIsAllZero) {
  ASSERT_EQ(run({"gen", "--d", "5", "--p", "0", "--shots", "300", "--out", path("z")}), kExitOk);
  const SyndromeBatch b = read_synb(path("z/batch.synb"));
  for (std::uint8_t e : b.events) ASSERT_EQ(e, 0);
  for (std::uint8_t l : b.labels) ASSERT_EQ(l, 0);
}

TEST_F(CliTest, GenDemPathRecordsSource) {
  ASSERT_EQ(run({"gen", "--d", "3", "--p", "0.005", "--shots", "200", "--dem", "--out", path("dem")}), kExitOk);
  EXPECT_EQ(read_synb(path("dem/batch.synb")).meta.source, "dem");
}

TEST_F(CliTest, ManifestRerunReproducesOutputs) {
  ASSERT_EQ(run({"gen", "--d", "3", "--p", "0.003", "--shots", "256", "--seed", "9", "--pdec-arch", "attention",
                 "--out", path("first")}),
            kExitOk);
  ASSERT_EQ(run({"gen", "--config", path("first/manifest.json"), "--out", path("second")}), kExitOk);
  EXPECT_EQ(slurp(path("first/batch.synb")), slurp(path("second/batch.synb")));
  const SyndromeBatch b = read_synb(path("second/batch.synb"));
  EXPECT_EQ(b.meta.injection_rounds.size(), 1u);
}

TEST_F(CliTest, FlagsOverrideConfigFileOverDefaults) {
  write("cfg.json", R"({"shots": 100, "seed": 4})");
  ASSERT_EQ(run({"gen", "--config", path("cfg.json"), "--shots", "50", "--out", path("o")}), kExitOk);
  const nlohmann::json m = read_json_file(path("o/manifest.json"));
  EXPECT_EQ(m["config"]["shots"], 50);
  EXPECT_EQ(m["config"]["seed"], 4);
  EXPECT_EQ(m["config"]["d"], 3);
  EXPECT_EQ(m["config"]["cycles"], 7);
}

TEST_F(CliTest, ManifestDigestsVerifyAndDetectTampering) {
  ASSERT_EQ(run({"gen", "--shots", "64", "--out", path("m")}), kExitOk);
  EXPECT_TRUE(verify_manifest(path("m")).empty());
  EXPECT_EQ(run({"verify", path("m")}), kExitOk);
  std::ofstream(path("m/batch.synb"), std::ios::app) << "x";
  EXPECT_EQ(verify_manifest(path("m")), std::vector<std::string>{"batch.synb"});
  EXPECT_EQ(run({"verify", path("m")}), kExitMissingData);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"gen", "--pdec-alpha", "1e-5", "--out", path("x")}), kExitUsage);
  EXPECT_EQ(run({"gen", "--block", "3", "--out", path("x")}), kExitUsage);
  EXPECT_EQ(run({"gen", "--d", "4", "--out", path("x")}), kExitUsage);
  EXPECT_EQ(run({"gen", "--d", "three", "--out", path("x")}), kExitUsage);
  EXPECT_EQ(run({"gen"}), kExitUsage);
  EXPECT_EQ(run({"nonsense"}), kExitUsage);
  write_tiny_config("tiny.json");
  EXPECT_EQ(run({"train", "--config", path("tiny.json"), "--mixer", "bogus", "--out", path("t")}), kExitUsage);
  write("extra.json", R"({"shots": 10, "colour": "red"})");
  EXPECT_EQ(run({"gen", "--config", path("extra.json"), "--out", path("x")}), kExitUsage);
}

TEST_F(CliTest, SmokeTrainEmitsCheckpointAndResumeContinuesMetrics) {
  write_tiny_config("tiny.json");
  ASSERT_EQ(run({"train", "--config", path("tiny.json"), "--iterations", "10", "--out", path("t")}), kExitOk);
  EXPECT_TRUE(fs::exists(path("t/ckpt_00000010.ckpt")));
  EXPECT_TRUE(fs::exists(path("t/last.ckpt")));
  ASSERT_EQ(run({"train", "--config", path("tiny.json"), "--resume", "--out", path("t")}), kExitOk);
  const auto rows = csv_rows(path("t/metrics.csv"));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0][0], "iter");
  std::vector<long> iters;
  for (std::size_t i = 1; i < rows.size(); ++i) iters.push_back(std::stol(rows[i][0]));
  EXPECT_EQ(iters, (std::vector<long>{5, 10, 15, 20, 25, 30}));
  EXPECT_TRUE(fs::exists(path("t/ckpt_00000030.ckpt")));
  EXPECT_TRUE(verify_manifest(path("t")).empty());
}

TEST_F(CliTest, ResumedRunMatchesUninterruptedCheckpoint) {
  write_tiny_config("tiny.json");
  ASSERT_EQ(run({"train", "--config", path("tiny.json"), "--out", path("full"), "--threads", "1"}), kExitOk);
  ASSERT_EQ(run({"train", "--config", path("tiny.json"), "--iterations", "20", "--out", path("part")}), kExitOk);
  ASSERT_EQ(run({"train", "--config", path("tiny.json"), "--resume", "--out", path("part"), "--threads", "2"}),
            kExitOk);
  EXPECT_EQ(slurp(path("full/last.ckpt")), slurp(path("part/last.ckpt")));
}

TEST_F(CliTest, NumericFailureExitsFive) {
  write_tiny_config("hot.json", R"(, "lr_init": 1e30, "lr_min": 1e30, "clip": 1e30)");
  EXPECT_EQ(run({"train", "--config", path("hot.json"), "--iterations", "200", "--out", path("hot")}),
            kExitNumeric);
}

TEST_F(CliTest, FinetuneNeedsMatchingBaseAndRate) {
  write_tiny_config("tiny.json");
  ASSERT_EQ(run({"train", "--config", path("tiny.json"), "--iterations", "10", "--out", path("base")}), kExitOk);
  EXPECT_EQ(run({"finetune", "--base", path("base/last.ckpt"), "--out", path("ft")}), kExitUsage);
  ASSERT_EQ(run({"finetune", "--base", path("base/last.ckpt"), "--p", "0.02", "--iterations", "5",
                 "--log-every", "5", "--ckpt-every", "5", "--eval-every", "5", "--out", path("ft")}),
            kExitOk);
  const nlohmann::json m = read_json_file(path("ft/manifest.json"));
  EXPECT_DOUBLE_EQ(m["config"]["p"].get<double>(), 0.02);
  EXPECT_DOUBLE_EQ(m["config"]["lr_init"].get<double>(), 2e-6);
  EXPECT_EQ(run({"finetune", "--base", path("base/last.ckpt"), "--p", "0.02", "--d", "5", "--out", path("ft5")}),
            kExitCheckpoint);
}

TEST_F(CliTest, RealtimeEvalLogsFourInjections) {
  write_tiny_config("tiny.json");
  ASSERT_EQ(run({"train", "--config", path("tiny.json"), "--iterations", "10", "--out", path("t")}), kExitOk);
  ASSERT_EQ(run({"eval", "--ckpt", path("t/last.ckpt"), "--mode", "realtime", "--p", "0.004", "--shots", "128",
                 "--emit-plot-data", "--out", path("rt")}),
            kExitOk);
  const auto inj = csv_rows(path("rt/injections.csv"));
  ASSERT_EQ(inj.size(), 5u);
  for (int k = 1; k <= 4; ++k) EXPECT_EQ(std::stoi(inj[k][0]), 7 * k);
  const auto ep = csv_rows(path("rt/endpoints.csv"));
  ASSERT_EQ(ep.size(), 5u);
  EXPECT_EQ(ep.back()[0], "28");
  EXPECT_TRUE(fs::exists(path("rt/fidelity_decay_realtime.csv")));
  const nlohmann::json j = read_json_file(path("rt/eval.json"));
  EXPECT_EQ(j["total_cycles"], 28);
}

TEST_F(CliTest, EvalDistanceMismatchExitsThree) {
  write_tiny_config("tiny.json");
  ASSERT_EQ(run({"train", "--config", path("tiny.json"), "--iterations", "5", "--out", path("t")}), kExitOk);
  EXPECT_EQ(run({"eval", "--ckpt", path("t/last.ckpt"), "--d", "5", "--shots", "16", "--out", path("e")}),
            kExitCheckpoint);
  write("junk.ckpt", "not a checkpoint");
  EXPECT_EQ(run({"eval", "--ckpt", path("junk.ckpt"), "--shots", "16", "--out", path("e")}), kExitCheckpoint);
}

TEST_F(CliTest, NoiselessBaselineHasUnitFidelity) {
  ASSERT_EQ(run({"eval", "--baseline", "--d", "3", "--p", "0", "--shots", "200", "--out", path("b")}), kExitOk);
  const auto ep = csv_rows(path("b/endpoints.csv"));
  ASSERT_EQ(ep.size(), 5u);
  for (std::size_t i = 1; i < ep.size(); ++i) EXPECT_DOUBLE_EQ(std::stod(ep[i][3]), 1.0);
}

TEST_F(CliTest, ThresholdFixtureAndMissingDistance) {
  std::ostringstream csv;
  csv << "d,p,ler,shots\n";
  for (int d : {3, 5}) {
    const int k = (d + 1) / 2;
    for (double p : {0.004, 0.007, 0.012, 0.02}) {
      char row[96];
      std::snprintf(row, sizeof(row), "%d,%.17g,%.17g,100000\n", d, p, 0.1 * std::pow(p / 0.01, k));
      csv << row;
    }
  }
  fs::create_directories(path("curves"));
  write("curves/all.csv", csv.str());
  ASSERT_EQ(run({"threshold", "--curves", path("curves"), "--bootstrap", "50", "--out", path("th")}), kExitOk);
  const nlohmann::json j = read_json_file(path("th/threshold.json"));
  EXPECT_NEAR(j["p_th"].get<double>(), 0.01, 1e-12);

  std::string single;
  for (const std::string& line : {std::string("d,p,ler\n"), std::string("3,0.004,0.01\n"),
                                  std::string("3,0.01,0.1\n")}) {
    single += line;
  }
  write("single.csv", single);
  EXPECT_EQ(run({"threshold", "--curves", path("single.csv"), "--out", path("th1")}), kExitMissingData);
  EXPECT_EQ(run({"threshold", "--curves", path("absent"), "--out", path("th2")}), kExitMissingData);
}

TEST_F(CliTest, ThresholdReportsNotBracketed) {
  write("flat.csv", "d,p,ler\n3,0.001,0.01\n3,0.002,0.02\n5,0.001,0.001\n5,0.002,0.002\n");
  ASSERT_EQ(run({"threshold", "--curves", path("flat.csv"), "--bootstrap", "0", "--out", path("th")}), kExitOk);
  EXPECT_EQ(read_json_file(path("th/threshold.json"))["p_th"], "not bracketed");
}

TEST_F(CliTest, BenchSelfTestAndEnvironment) {
  ASSERT_EQ(run({"bench", "--self-test", "--out", path("st")}), kExitOk);
  const nlohmann::json j = read_json_file(path("st/bench.json"));
  ASSERT_EQ(j["exponents"].size(), 2u);
  for (const auto& e : j["exponents"]) EXPECT_TRUE(e["pass"].get<bool>());
  EXPECT_TRUE(j.contains("env"));
  for (const auto& r : j["results"]) EXPECT_TRUE(r.contains("env"));
  ASSERT_EQ(run({"bench", "--refit", path("st/bench.json"), "--out", path("rf")}), kExitOk);

  nlohmann::json stripped = j;
  for (auto& r : stripped["results"]) r.erase("env");
  write("noenv.json", stripped.dump());
  EXPECT_EQ(run({"bench", "--refit", path("noenv.json"), "--out", path("rf2")}), kExitMissingData);
}

TEST_F(CliTest, BenchTimingsWriteCsvAndStableInputDigests) {
  const std::vector<std::string> a = {"bench", "--kinds", "mamba,attention", "--d-list", "3,5,7,9",
                                      "--d-model", "16", "--reps", "30", "--warmup", "2"};
  auto with_out = [&](const std::string& o) {
    std::vector<std::string> v = a;
    v.push_back("--out");
    v.push_back(path(o));
    return v;
  };
  ASSERT_EQ(run(with_out("b1")), kExitOk);
  ASSERT_EQ(run(with_out("b2")), kExitOk);
  const auto rows = csv_rows(path("b1/bench.csv"));
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"kind", "d", "l", "median_ms", "iqr_ms", "reps"}));
  EXPECT_EQ(slurp(path("b1/bench_inputs.csv")), slurp(path("b2/bench_inputs.csv")));
  EXPECT_EQ(read_json_file(path("b1/bench.json"))["exponents"].size(), 2u);
}

TEST_F(CliTest, ThreadsFallBackToEnvironment) {
  ::setenv("QECD_THREADS", "3", 1);
  EXPECT_EQ(cli_threads(nullptr, 0), 3u);
  ::setenv("QECD_THREADS", "lots", 1);
  EXPECT_THROW(cli_threads(nullptr, 0), std::exception);
  ::unsetenv("QECD_THREADS");
  EXPECT_EQ(cli_threads(nullptr, 0), 0u);
}

}  // namespace
}  // namespace qecd::cli
