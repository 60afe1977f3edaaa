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

#include "cli/manifest.h"

#include <openssl/evp.h>

#include <array>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>

#include "qecd/util/errors.h"

namespace qecd::cli {
namespace fs = std::filesystem;

namespace {

using DigestCtx = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;

DigestCtx new_digest() {
  DigestCtx ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw DataError("sha256: digest initialization failed");
  }
  return ctx;
}

std::string hex_digest(EVP_MD_CTX* ctx) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

}  // namespace

std::string sha256_bytes(const void* data, std::size_t size) {
  DigestCtx ctx = new_digest();
  EVP_DigestUpdate(ctx.get(), data, size);
  return hex_digest(ctx.get());
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path + " for digest");
  DigestCtx ctx = new_digest();
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return hex_digest(ctx.get());
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<FileDigest> digest_files(const std::string& dir, const std::vector<std::string>& files) {
  std::vector<FileDigest> out;
  const fs::path base = fs::weakly_canonical(dir);
  for (const std::string& f : files) {
    const fs::path p = fs::weakly_canonical(f);
    const fs::path rel = p.lexically_relative(base);
    const bool inside = !rel.empty() && *rel.begin() != "..";
    out.push_back({inside ? rel.string() : p.string(), sha256_file(p.string())});
  }
  return out;
}

nlohmann::json RunManifest::to_json() const {
  auto digests = [](const std::vector<FileDigest>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const FileDigest& d : v) a.push_back({{"path", d.path}, {"sha256", d.sha256}});
    return a;
  };
  return {{"command", command},   {"argv", argv},         {"config", config},
          {"seed", seed},         {"version", version},   {"started", started},
          {"finished", finished}, {"status", status},     {"inputs", digests(inputs)},
          {"outputs", digests(outputs)}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.argv = j.value("argv", std::vector<std::string>{});
    m.config = j.at("config");
    m.seed = j.value("seed", std::uint64_t{0});
    m.version = j.value("version", "");
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    m.status = j.value("status", "ok");
    for (const char* key : {"inputs", "outputs"}) {
      auto& dst = std::string(key) == "inputs" ? m.inputs : m.outputs;
      for (const auto& d : j.value(key, nlohmann::json::array())) {
        dst.push_back({d.at("path").get<std::string>(), d.at("sha256").get<std::string>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void write_manifest(const std::string& dir, const RunManifest& m) {
  const fs::path path = fs::path(dir) / kManifestName;
  const fs::path tmp = fs::path(dir) / (std::string(kManifestName) + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << m.to_json().dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

std::vector<std::string> verify_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / kManifestName;
  std::ifstream in(path);
  if (!in) throw DataError("no manifest in " + dir);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  const RunManifest m = RunManifest::from_json(j);
  std::vector<std::string> bad;
  for (const FileDigest& d : m.outputs) {
    const fs::path p = fs::path(d.path).is_absolute() ? fs::path(d.path) : fs::path(dir) / d.path;
    if (!fs::exists(p) || sha256_file(p.string()) != d.sha256) bad.push_back(d.path);
  }
  return bad;
}

}  // namespace qecd::cli
