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

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli/manifest.h"

namespace qecd::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitUsage = 2,
  kExitCheckpoint = 3,
  kExitMissingData = 4,
  kExitNumeric = 5,
};

enum class ValueType { kInt, kDouble, kString, kBool, kIntList, kDoubleList, kStringList };

/// Command-line flags that mirror keys of a command's JSON config. A value
/// given on the command line beats the config file, which beats the default.
class ConfigFlags {
 public:
  explicit ConfigFlags(CLI::App* app) : app_(app) {}

  /// `key` may address a nested field with '/' ("model/d_model").
  CLI::Option* add(const std::string& flag, const std::string& key, ValueType type,
                   const std::string& help);

  /// Writes every flag present on the command line into `cfg`. Throws
  /// ParameterError on a value that does not parse as its type.
  void apply(nlohmann::json& cfg) const;

  /// True if the flag for `key` was given.
  bool given(const std::string& key) const;

 private:
  struct Entry {
    std::string key;
    ValueType type;
    CLI::Option* opt = nullptr;
    std::string value;
    std::vector<std::string> list;
    bool flag = false;
  };
  CLI::App* app_;
  std::deque<Entry> entries_;
};

/// Throws DataError if the file is missing or not JSON.
nlohmann::json read_json_file(const std::string& path);

/// Config object from a file. A run manifest contributes its resolved
/// "config", so any output directory can seed a rerun.
nlohmann::json load_config(const std::string& path);

/// `cfg` with missing keys taken from `defaults`. Keys absent from
/// `defaults` are rejected with a ParameterError naming all of them.
nlohmann::json with_defaults(const nlohmann::json& cfg, const nlohmann::json& defaults,
                             const std::string& command);

/// --threads when given, else $QECD_THREADS, else 0 (all cores).
unsigned cli_threads(const CLI::Option* opt, unsigned flag_value);

/// Creates `dir` (and parents). Throws DataError when that fails.
void ensure_dir(const std::string& dir);

/// Writes `text` to `path`, throwing DataError on failure.
void write_text(const std::string& path, const std::string& text);

std::string artifact_version();

/// Bookkeeping for one command run: inputs, outputs, resolved config.
/// `finish` digests everything and writes the output directory's manifest.
class RunRecorder {
 public:
  RunRecorder(std::string command, std::vector<std::string> argv, std::string out_dir);

  void set_config(nlohmann::json config, std::uint64_t seed);
  void add_input(const std::string& path) { inputs_.push_back(path); }
  void add_output(const std::string& path) { outputs_.push_back(path); }
  const std::string& out_dir() const { return out_dir_; }
  /// Path of `name` inside the output directory.
  std::string out(const std::string& name) const;
  void finish(const std::string& status = "ok");

 private:
  RunManifest m_;
  std::string out_dir_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
};

/// Everything a subcommand needs after parsing.
struct Invocation {
  std::vector<std::string> argv;
};

class Command {
 public:
  virtual ~Command() = default;
  virtual int run(const Invocation& inv) = 0;
};

std::unique_ptr<Command> make_gen(CLI::App* app);
std::unique_ptr<Command> make_train(CLI::App* app);
std::unique_ptr<Command> make_finetune(CLI::App* app);
std::unique_ptr<Command> make_eval(CLI::App* app);
std::unique_ptr<Command> make_threshold(CLI::App* app);
std::unique_ptr<Command> make_bench(CLI::App* app);
std::unique_ptr<Command> make_verify(CLI::App* app);

/// Parses and runs one command, mapping failures onto exit codes:
/// 2 usage or invalid parameters, 3 checkpoint mismatch, 4 missing or
/// unusable data, 5 numeric failure, 1 anything else.
int run_cli(int argc, const char* const* argv);

}  // namespace qecd::cli
