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

#include <string>
#include <vector>

#include <json.hpp>

namespace qecd::cli {

/// Hex SHA-256 of a file's bytes. Throws DataError if it cannot be read.
std::string sha256_file(const std::string& path);

/// Hex SHA-256 of a byte buffer.
std::string sha256_bytes(const void* data, std::size_t size);

struct FileDigest {
  std::string path;  // relative to the manifest's directory when inside it
  std::string sha256;
};

/// One per output directory: what ran, with which resolved configuration,
/// and digests of everything read and written.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string version;
  std::string started;
  std::string finished;
  std::string status = "ok";
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

/// Current UTC time, ISO 8601.
std::string utc_now();

/// Digests `files` (paths inside `dir` are stored relative to it).
std::vector<FileDigest> digest_files(const std::string& dir, const std::vector<std::string>& files);

/// Writes `dir/manifest.json`, replacing any previous one.
void write_manifest(const std::string& dir, const RunManifest& m);

/// Re-reads `dir/manifest.json` and recomputes every output digest. Returns
/// the paths whose digest no longer matches (empty when all verify).
std::vector<std::string> verify_manifest(const std::string& dir);

inline constexpr const char* kManifestName = "manifest.json";

}  // namespace qecd::cli
