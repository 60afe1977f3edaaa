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

#include "cli/app.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "qecd/util/errors.h"

#ifndef QECD_VERSION
#define QECD_VERSION "unknown"
#endif

namespace qecd::cli {
namespace fs = std::filesystem;
namespace {

nlohmann::json parse_scalar(const std::string& key, const std::string& s, ValueType type) {
  try {
    std::size_t used = 0;
    switch (type) {
      case ValueType::kInt:
      case ValueType::kIntList: {
        const long long v = std::stoll(s, &used);
        if (used != s.size()) break;
        return v;
      }
      case ValueType::kDouble:
      case ValueType::kDoubleList: {
        const double v = std::stod(s, &used);
        if (used != s.size()) break;
        return v;
      }
      default:
        return s;
    }
  } catch (const std::logic_error&) {
  }
  throw ParameterError("--" + key + ": cannot parse '" + s + "'");
}

nlohmann::json::json_pointer pointer(const std::string& key) {
  return nlohmann::json::json_pointer("/" + key);
}

}  // namespace

CLI::Option* ConfigFlags::add(const std::string& flag, const std::string& key, ValueType type,
                              const std::string& help) {
  Entry& e = entries_.emplace_back();
  e.key = key;
  e.type = type;
  switch (type) {
    case ValueType::kBool:
      e.opt = app_->add_flag(flag, e.flag, help);
      break;
    case ValueType::kIntList:
    case ValueType::kDoubleList:
    case ValueType::kStringList:
      e.opt = app_->add_option(flag, e.list, help)->delimiter(',');
      break;
    default:
      e.opt = app_->add_option(flag, e.value, help);
  }
  switch (type) {
    case ValueType::kInt: e.opt->type_name("INT"); break;
    case ValueType::kDouble: e.opt->type_name("FLOAT"); break;
    case ValueType::kIntList: e.opt->type_name("INT,..."); break;
    case ValueType::kDoubleList: e.opt->type_name("FLOAT,..."); break;
    case ValueType::kStringList: e.opt->type_name("TEXT,..."); break;
    default: break;
  }
  return e.opt;
}

void ConfigFlags::apply(nlohmann::json& cfg) const {
  for (const Entry& e : entries_) {
    if (e.opt->count() == 0) continue;
    nlohmann::json v;
    switch (e.type) {
      case ValueType::kBool:
        v = e.flag;
        break;
      case ValueType::kIntList:
      case ValueType::kDoubleList:
      case ValueType::kStringList:
        v = nlohmann::json::array();
        for (const std::string& s : e.list) v.push_back(parse_scalar(e.key, s, e.type));
        break;
      default:
        v = parse_scalar(e.key, e.value, e.type);
    }
    cfg[pointer(e.key)] = v;
  }
}

bool ConfigFlags::given(const std::string& key) const {
  for (const Entry& e : entries_) {
    if (e.key == key) return e.opt->count() > 0;
  }
  return false;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + " is not valid JSON: " + e.what());
  }
}

nlohmann::json load_config(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  if (!j.is_object()) throw DataError(path + ": config must be a JSON object");
  if (j.contains("command") && j.contains("config") && j.contains("outputs")) return j["config"];
  return j;
}

nlohmann::json with_defaults(const nlohmann::json& cfg, const nlohmann::json& defaults,
                             const std::string& command) {
  std::vector<std::string> unknown;
  for (const auto& [k, v] : cfg.items()) {
    if (!defaults.contains(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = command + ": unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ParameterError(msg);
  }
  nlohmann::json out = defaults;
  for (const auto& [k, v] : cfg.items()) out[k] = v;
  return out;
}

unsigned cli_threads(const CLI::Option* opt, unsigned flag_value) {
  if (opt != nullptr && opt->count() > 0) return flag_value;
  if (const char* env = std::getenv("QECD_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0) throw ParameterError("QECD_THREADS must be a non-negative integer");
    return static_cast<unsigned>(v);
  }
  return 0;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

std::string artifact_version() { return QECD_VERSION; }

RunRecorder::RunRecorder(std::string command, std::vector<std::string> argv, std::string out_dir)
    : out_dir_(std::move(out_dir)) {
  m_.command = std::move(command);
  m_.argv = std::move(argv);
  m_.version = artifact_version();
  m_.started = utc_now();
  ensure_dir(out_dir_);
}

void RunRecorder::set_config(nlohmann::json config, std::uint64_t seed) {
  m_.config = std::move(config);
  m_.seed = seed;
}

std::string RunRecorder::out(const std::string& name) const { return (fs::path(out_dir_) / name).string(); }

void RunRecorder::finish(const std::string& status) {
  m_.status = status;
  m_.finished = utc_now();
  m_.inputs = digest_files(out_dir_, inputs_);
  m_.outputs = digest_files(out_dir_, outputs_);
  write_manifest(out_dir_, m_);
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app("Neural surface-code decoder lab", "qecd");
  app.set_version_flag("--version", artifact_version());
  app.require_subcommand(1);
  struct Sub {
    CLI::App* app;
    std::unique_ptr<Command> cmd;
  };
  std::vector<Sub> subs;
  auto add = [&](const char* name, const char* help, auto make) {
    CLI::App* s = app.add_subcommand(name, help);
    subs.push_back({s, make(s)});
  };
  add("gen", "Sample syndrome batches from a noisy memory circuit", make_gen);
  add("train", "Train a decoder", make_train);
  add("finetune", "Fine-tune a trained decoder at a new noise rate", make_finetune);
  add("eval", "Evaluate a checkpoint (memory or real-time protocol)", make_eval);
  add("threshold", "Locate the error threshold from LER curves", make_threshold);
  add("bench", "Time isolated mixer blocks and fit scaling exponents", make_bench);
  add("verify", "Recheck the output digests recorded in a run manifest", make_verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  Invocation inv;
  for (int i = 0; i < argc; ++i) inv.argv.emplace_back(argv[i]);
  for (Sub& s : subs) {
    if (!s.app->parsed()) continue;
    try {
      return s.cmd->run(inv);
    } catch (const ParameterError& e) {
      std::cerr << "error: " << e.what() << "\n" << s.app->help();
      return kExitUsage;
    } catch (const DimensionError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const CheckpointError& e) {
      std::cerr << "checkpoint error: " << e.what() << "\n";
      return kExitCheckpoint;
    } catch (const DataError& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return kExitMissingData;
    } catch (const FitError& e) {
      std::cerr << "fit error: " << e.what() << "\n";
      return kExitMissingData;
    } catch (const NumericError& e) {
      std::cerr << "numeric failure: " << e.what() << "\n";
      return kExitNumeric;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitOther;
    }
  }
  return kExitUsage;
}

}  // namespace qecd::cli
